//! Exact acceptance probabilities and maximum regret for small designs.
//!
//! The two arms are independent, so the outcome distribution factors into a
//! treated part over `2^n1` outcome vectors and a control part over `2^n0`.
//! Each outcome vector has a fixed weighted sum (the rule weights do not
//! depend on the probabilities); sorting the control sums once turns the
//! acceptance probability into
//!
//! ```text
//! sum_{y1} P(y1) * P(control sum <= treated sum(y1))
//! ```
//!
//! which is the full `2^(n1 + n0)` enumeration evaluated in `O(2^n1 + 2^n0)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{check_unit, distance, worst_case_profiles, Arm, ExperimentDesign, LIPSCHITZ_TOLERANCE};
use crate::error::{Error, Result};
use crate::kernel::{weights, KernelSpec, RuleWeights};

/// Largest `n1 + n0` accepted by the enumeration.
pub const MAX_ENUMERATED_SITES: usize = 24;

/// Largest number of (treated, control) site-profile pairs the brute-force
/// search will evaluate.
pub const MAX_BRUTE_FORCE_PAIRS: u128 = 200_000_000;

/// Largest number of site profiles stored for a single arm.
pub const MAX_BRUTE_FORCE_PROFILES: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactMethod {
    ReducedTwoParameter,
    FullSpaceBruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRegretResult {
    pub value: f64,
    /// Full probability vectors (target point first) attaining `value`.
    pub argmax_profile: (Vec<f64>, Vec<f64>),
    pub method: ExactMethod,
}

/// Outcome-vector bookkeeping for one design and bandwidth.
pub struct ExactEngine {
    n1: usize,
    n0: usize,
    /// For each treated outcome mask, how many control outcome vectors have a
    /// weighted sum not exceeding it (the rule treats against exactly those).
    accept_prefix: Vec<usize>,
    /// Control masks sorted by weighted sum.
    control_order: Vec<usize>,
}

impl ExactEngine {
    pub fn new(design: &ExperimentDesign, kernel: &KernelSpec, theta: f64) -> Result<Self> {
        let (n1, n0) = (design.n1(), design.n0());
        if n1 + n0 > MAX_ENUMERATED_SITES {
            return Err(Error::EnumerationTooLarge {
                what: "outcome vectors",
                size: 1u128 << (n1 + n0),
                limit: 1u128 << MAX_ENUMERATED_SITES,
            });
        }
        let rule = RuleWeights::from_weights(&weights(design, kernel, theta)?);
        let treated_sums = subset_sums(&rule.w1);
        let control_sums = subset_sums(&rule.w0);
        let mut control_order: Vec<usize> = (0..control_sums.len()).collect();
        control_order.sort_by_key(|&m| (control_sums[m], m));
        let sorted: Vec<u64> = control_order.iter().map(|&m| control_sums[m]).collect();
        let accept_prefix = treated_sums.iter().map(|&t| sorted.partition_point(|&c| c <= t)).collect();
        Ok(ExactEngine { n1, n0, accept_prefix, control_order })
    }

    /// Cumulative control probabilities along the sorted order; entry `j` is
    /// the probability of the `j` smallest control sums.
    fn control_cdf(&self, p0: &[f64]) -> Vec<f64> {
        let probs = mask_probabilities(p0);
        let mut cdf = Vec::with_capacity(probs.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for &m in &self.control_order {
            acc += probs[m];
            cdf.push(acc);
        }
        cdf
    }

    /// `P(treat | control outcome law)` for every treated outcome mask.
    fn conditional_acceptance(&self, p0: &[f64]) -> Vec<f64> {
        let cdf = self.control_cdf(p0);
        self.accept_prefix.iter().map(|&j| cdf[j]).collect()
    }

    /// Exact acceptance probability for site probabilities `p1` (length n1)
    /// and `p0` (length n0).
    pub fn acceptance(&self, p1: &[f64], p0: &[f64]) -> f64 {
        debug_assert_eq!(p1.len(), self.n1);
        debug_assert_eq!(p0.len(), self.n0);
        dot(&mask_probabilities(p1), &self.conditional_acceptance(p0))
    }

    /// Regret at full probability vectors (target point first).
    pub fn regret_at(&self, p1_full: &[f64], p0_full: &[f64]) -> f64 {
        let gap = p1_full[0] - p0_full[0];
        let acc = self.acceptance(&p1_full[1..], &p0_full[1..]);
        let optimal = if gap >= 0.0 { 1.0 } else { 0.0 };
        gap * (optimal - acc)
    }
}

fn subset_sums(w: &[u64]) -> Vec<u64> {
    let mut sums = vec![0u64; 1 << w.len()];
    for (i, &wi) in w.iter().enumerate() {
        let half = 1 << i;
        for m in 0..half {
            sums[m | half] = sums[m] + wi;
        }
    }
    sums
}

/// Probability of each outcome mask under independent Bernoulli sites; bit
/// `i` of the mask is the outcome of site `i`.
fn mask_probabilities(p: &[f64]) -> Vec<f64> {
    let mut probs = vec![0.0; 1 << p.len()];
    probs[0] = 1.0;
    for (i, &pi) in p.iter().enumerate() {
        let half = 1 << i;
        for m in 0..half {
            let base = probs[m];
            probs[m] = base * (1.0 - pi);
            probs[m | half] = base * pi;
        }
    }
    probs
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_lengths(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got })
    }
}

fn check_probabilities(what: &'static str, p: &[f64]) -> Result<()> {
    p.iter().try_for_each(|&v| check_unit(what, v))
}

/// Exact probability that the rule treats when site `i` of the treated arm
/// succeeds with probability `p1_vec[i]` and likewise for control.
pub fn exact_acceptance(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    p1_vec: &[f64],
    p0_vec: &[f64],
) -> Result<f64> {
    check_lengths("treated site probabilities", design.n1(), p1_vec.len())?;
    check_lengths("control site probabilities", design.n0(), p0_vec.len())?;
    check_probabilities("treated site probability", p1_vec)?;
    check_probabilities("control site probability", p0_vec)?;
    Ok(ExactEngine::new(design, kernel, theta)?.acceptance(p1_vec, p0_vec))
}

/// Exact regret at full probability vectors. Membership in the parameter
/// space is not required.
pub fn exact_regret_at(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    p1_full: &[f64],
    p0_full: &[f64],
) -> Result<f64> {
    check_lengths("treated probability vector", design.n1() + 1, p1_full.len())?;
    check_lengths("control probability vector", design.n0() + 1, p0_full.len())?;
    check_probabilities("treated probability", p1_full)?;
    check_probabilities("control probability", p0_full)?;
    Ok(ExactEngine::new(design, kernel, theta)?.regret_at(p1_full, p0_full))
}

fn anchor_grid(resolution: usize) -> Result<Vec<f64>> {
    if resolution < 2 {
        return Err(Error::Config(format!("grid resolution must be at least 2, got {resolution}")));
    }
    let denom = (resolution - 1) as f64;
    Ok((0..resolution).map(|k| k as f64 / denom).collect())
}

/// Per-branch maxima of the reduced problem: `(treat-better, control-better)`.
pub fn exact_branch_maxima(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    anchor_grid_resolution: usize,
) -> Result<(ExactRegretResult, ExactRegretResult)> {
    let grid = anchor_grid(anchor_grid_resolution)?;
    let engine = ExactEngine::new(design, kernel, theta)?;
    let mut best_minus: Option<ExactRegretResult> = None;
    let mut best_plus: Option<ExactRegretResult> = None;
    for &a1 in &grid {
        for &a0 in &grid {
            if a1 == a0 {
                continue;
            }
            let prof = worst_case_profiles(design, a1, a0)?;
            let (p1, p0, slot) = if a1 > a0 {
                (prof.p1_lo, prof.p0_hi, &mut best_minus)
            } else {
                (prof.p1_hi, prof.p0_lo, &mut best_plus)
            };
            let value = engine.regret_at(&p1, &p0);
            if slot.as_ref().is_none_or(|b| value > b.value) {
                *slot = Some(ExactRegretResult {
                    value,
                    argmax_profile: (p1, p0),
                    method: ExactMethod::ReducedTwoParameter,
                });
            }
        }
    }
    Ok((best_minus.expect("grid has p1 > p0"), best_plus.expect("grid has p1 < p0")))
}

/// Maximum regret over the worst-case profiles anchored on a grid of target
/// probabilities.
pub fn exact_max_regret_reduced(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    anchor_grid_resolution: usize,
) -> Result<ExactRegretResult> {
    let (minus, plus) = exact_branch_maxima(design, kernel, theta, anchor_grid_resolution)?;
    Ok(if minus.value >= plus.value { minus } else { plus })
}

/// Site probabilities of one arm on the grid together with the range of grid
/// anchors compatible with them.
struct SiteProfile {
    sites: Vec<f64>,
    anchor_lo: f64,
    anchor_hi: f64,
}

struct ArmGeometry {
    radii: Vec<f64>,
    pair_bounds: Vec<Vec<f64>>,
}

impl ArmGeometry {
    fn new(design: &ExperimentDesign, arm: Arm) -> Self {
        let c = design.lipschitz_c();
        let x = design.covariates(arm);
        ArmGeometry {
            radii: design.radii(arm),
            pair_bounds: x.iter().map(|a| x.iter().map(|b| c * distance(a, b)).collect()).collect(),
        }
    }
}

/// All grid site profiles of one arm satisfying the pairwise constraints and
/// admitting at least one grid anchor.
fn enumerate_site_profiles(geo: &ArmGeometry, grid: &[f64], limit: u128) -> Result<Vec<SiteProfile>> {
    let denom = (grid.len() - 1) as f64;
    let anchor_range = |lo: f64, hi: f64| -> Option<(f64, f64)> {
        let k_lo = ((lo.max(0.0) - LIPSCHITZ_TOLERANCE) * denom).ceil().max(0.0) as usize;
        let k_hi = ((hi.min(1.0) + LIPSCHITZ_TOLERANCE) * denom).floor().min(denom) as usize;
        (k_lo <= k_hi).then(|| (grid[k_lo], grid[k_hi]))
    };
    let n = geo.radii.len();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        geo: &ArmGeometry,
        grid: &[f64],
        current: &mut Vec<f64>,
        lo: f64,
        hi: f64,
        out: &mut Vec<SiteProfile>,
        limit: u128,
        anchor_range: &dyn Fn(f64, f64) -> Option<(f64, f64)>,
    ) -> Result<()> {
        let i = current.len();
        if i == geo.radii.len() {
            if let Some((a_lo, a_hi)) = anchor_range(lo, hi) {
                if out.len() as u128 >= limit {
                    return Err(Error::EnumerationTooLarge {
                        what: "brute-force site profiles",
                        size: limit + 1,
                        limit,
                    });
                }
                out.push(SiteProfile { sites: current.clone(), anchor_lo: a_lo, anchor_hi: a_hi });
            }
            return Ok(());
        }
        let r = geo.radii[i];
        for &v in grid {
            let ok = current
                .iter()
                .enumerate()
                .all(|(j, &pj)| (v - pj).abs() <= geo.pair_bounds[i][j] + LIPSCHITZ_TOLERANCE);
            if !ok {
                continue;
            }
            let (nlo, nhi) = (lo.max(v - r), hi.min(v + r));
            if anchor_range(nlo, nhi).is_none() {
                continue;
            }
            current.push(v);
            recurse(geo, grid, current, nlo, nhi, out, limit, anchor_range)?;
            current.pop();
        }
        Ok(())
    }
    recurse(geo, grid, &mut current, f64::NEG_INFINITY, f64::INFINITY, &mut out, limit, &anchor_range)?;
    Ok(out)
}

/// Maximum regret over every grid profile in the parameter space, without
/// any structural shortcut beyond the following: for fixed site
/// probabilities the acceptance probability does not involve the target
/// anchors, so the regret of each sign is maximized by the widest feasible
/// anchor gap.
pub fn exact_max_regret_bruteforce(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    per_site_grid_resolution: usize,
) -> Result<ExactRegretResult> {
    let grid = anchor_grid(per_site_grid_resolution)?;
    let engine = ExactEngine::new(design, kernel, theta)?;
    let treated = enumerate_site_profiles(&ArmGeometry::new(design, Arm::Treated), &grid, MAX_BRUTE_FORCE_PROFILES)?;
    let budget = (MAX_BRUTE_FORCE_PAIRS / treated.len().max(1) as u128).min(MAX_BRUTE_FORCE_PROFILES);
    let control = enumerate_site_profiles(&ArmGeometry::new(design, Arm::Control), &grid, budget)?;
    let pairs = treated.len() as u128 * control.len() as u128;
    if pairs > MAX_BRUTE_FORCE_PAIRS {
        return Err(Error::EnumerationTooLarge {
            what: "brute-force profile pairs",
            size: pairs,
            limit: MAX_BRUTE_FORCE_PAIRS,
        });
    }
    let treated_probs: Vec<Vec<f64>> = treated.iter().map(|t| mask_probabilities(&t.sites)).collect();
    let control_accept: Vec<Vec<f64>> = control.iter().map(|c| engine.conditional_acceptance(&c.sites)).collect();

    // (value, treated index, control index, treat-better?)
    type Best = (f64, usize, usize, bool);
    let better = |a: Best, b: Best| -> Best {
        if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
            b
        } else {
            a
        }
    };
    let best = treated
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row: Best = (f64::NEG_INFINITY, usize::MAX, usize::MAX, true);
            for (j, c) in control.iter().enumerate() {
                let acc = dot(&treated_probs[i], &control_accept[j]);
                let up = t.anchor_hi - c.anchor_lo;
                if up > 0.0 {
                    row = better(row, (up * (1.0 - acc), i, j, true));
                }
                let down = c.anchor_hi - t.anchor_lo;
                if down > 0.0 {
                    row = better(row, (down * acc, i, j, false));
                }
            }
            row
        })
        .reduce(|| (f64::NEG_INFINITY, usize::MAX, usize::MAX, true), better);

    let (value, i, j, treat_better) = best;
    let (t, c) = (&treated[i], &control[j]);
    let (a1, a0) = if treat_better { (t.anchor_hi, c.anchor_lo) } else { (t.anchor_lo, c.anchor_hi) };
    let p1: Vec<f64> = std::iter::once(a1).chain(t.sites.iter().copied()).collect();
    let p0: Vec<f64> = std::iter::once(a0).chain(c.sites.iter().copied()).collect();
    Ok(ExactRegretResult { value, argmax_profile: (p1, p0), method: ExactMethod::FullSpaceBruteForce })
}

/// One randomized instance for checking the two-anchor reduction against the
/// full-space search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationInstance {
    pub x1: Vec<f64>,
    pub x0: Vec<f64>,
    pub lipschitz_c: f64,
    pub theta: f64,
}

impl VerificationInstance {
    pub fn design(&self) -> Result<ExperimentDesign> {
        ExperimentDesign::from_scalars(&self.x1, &self.x0, self.lipschitz_c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub instance: VerificationInstance,
    pub reduced: f64,
    pub brute_force: f64,
    /// Reduced-form regret at the anchors of the brute-force argmax.
    pub reduced_at_brute_anchors: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const VERIFY_LIPSCHITZ: [f64; 3] = [0.1, 0.3, 0.7];
pub const VERIFY_THETAS: [f64; 3] = [0.3, 1.0, 3.0];
/// Covariate lattice of the randomized instances. With the constants above
/// every `C * distance` is a multiple of 0.05, so worst-case profiles anchored
/// on a 21-point grid are themselves grid profiles.
pub const VERIFY_LATTICE: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

/// Random designs with `2 <= n1 + n0 <= max_n` on [`VERIFY_LATTICE`].
pub fn random_instances(seed: u64, count: usize, max_n: usize) -> Result<Vec<VerificationInstance>> {
    if max_n < 2 {
        return Err(Error::Config(format!("max-n must be at least 2, got {max_n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let total = rng.gen_range(2..=max_n);
            let n1 = rng.gen_range(1..total);
            let mut pick = |n: usize| -> Vec<f64> {
                (0..n).map(|_| VERIFY_LATTICE[rng.gen_range(0..VERIFY_LATTICE.len())]).collect()
            };
            let x1 = pick(n1);
            let x0 = pick(total - n1);
            VerificationInstance {
                x1,
                x0,
                lipschitz_c: VERIFY_LIPSCHITZ[rng.gen_range(0..3)],
                theta: VERIFY_THETAS[rng.gen_range(0..3)],
            }
        })
        .collect())
}

/// Compare both maximizations on one instance. Passes when they agree within
/// `2 / (anchor_resolution - 1)` and the reduced form evaluated at the
/// brute-force anchors is no smaller than the brute-force value (minus the
/// same slack).
pub fn verify_instance(
    instance: &VerificationInstance,
    kernel: &KernelSpec,
    anchor_resolution: usize,
    site_resolution: usize,
) -> Result<VerificationRecord> {
    let design = instance.design()?;
    let theta = instance.theta;
    let reduced = exact_max_regret_reduced(&design, kernel, theta, anchor_resolution)?;
    let brute = exact_max_regret_bruteforce(&design, kernel, theta, site_resolution)?;
    let (a1, a0) = (brute.argmax_profile.0[0], brute.argmax_profile.1[0]);
    let prof = worst_case_profiles(&design, a1, a0)?;
    let engine = ExactEngine::new(&design, kernel, theta)?;
    let projected =
        if a1 >= a0 { engine.regret_at(&prof.p1_lo, &prof.p0_hi) } else { engine.regret_at(&prof.p1_hi, &prof.p0_lo) };
    let tolerance = 2.0 / (anchor_resolution - 1) as f64;
    let passed = (reduced.value - brute.value).abs() <= tolerance && projected >= brute.value - tolerance;
    Ok(VerificationRecord {
        instance: instance.clone(),
        reduced: reduced.value,
        brute_force: brute.value,
        reduced_at_brute_anchors: projected,
        tolerance,
        passed,
    })
}
