//! Common-random-number Monte Carlo estimate of the maximum regret.
//!
//! For anchors `(p1, p0)` the worst case when treatment is better pairs the
//! lower treated profile with the upper control profile; the rule's
//! acceptance probability there is `pi_minus`. When control is better the
//! mirror configuration gives `pi_plus`. The maximum regret at a bandwidth is
//!
//! ```text
//! max( max_{p1 > p0} (p1 - p0) (1 - pi_minus),  max_{p1 < p0} (p0 - p1) pi_plus )
//! ```
//!
//! Outcomes are simulated by thresholding one fixed set of uniforms,
//! `Y = 1{U <= p}`, so with the draws held fixed every estimate is an exact,
//! monotone function of the anchors.
//!
//! The anchor grid is searched with a breakpoint scheme. For one draw, the
//! outcome at site `i` switches on at a single grid index (its "onset") as the
//! anchor increases, so each arm's weighted sum is a step function of the
//! anchor index. Cumulating the onsets gives the sums over the whole grid in
//! `O(n + G)` per draw, and a two-pointer sweep finds, for each treated index,
//! the prefix of control indices where the rule treats. The direct
//! evaluation ([`max_regret_naive`]) is kept as the reference and must give
//! identical counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{check_unit, clip_lower, clip_upper, Arm, ExperimentDesign};
use crate::error::{Error, Result};
use crate::kernel::{treats, weights, KernelSpec, RuleWeights};

/// Shared uniforms `U[s, i]` for both arms, row-major by draw.
#[derive(Debug, Clone, PartialEq)]
pub struct CrnDraws {
    seed: u64,
    stream: u64,
    s_draws: usize,
    n1: usize,
    n0: usize,
    u1: Vec<f64>,
    u0: Vec<f64>,
}

impl CrnDraws {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn s_draws(&self) -> usize {
        self.s_draws
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn u1(&self, s: usize) -> &[f64] {
        &self.u1[s * self.n1..(s + 1) * self.n1]
    }

    pub fn u0(&self, s: usize) -> &[f64] {
        &self.u0[s * self.n0..(s + 1) * self.n0]
    }

    fn check_design(&self, design: &ExperimentDesign) -> Result<()> {
        if self.n1 != design.n1() {
            return Err(Error::Dimension { what: "treated draws", expected: design.n1(), got: self.n1 });
        }
        if self.n0 != design.n0() {
            return Err(Error::Dimension { what: "control draws", expected: design.n0(), got: self.n0 });
        }
        Ok(())
    }
}

pub fn make_draws(seed: u64, s_draws: usize, design: &ExperimentDesign) -> Result<CrnDraws> {
    make_draws_stream(seed, 0, s_draws, design)
}

/// Draws from an independent ChaCha stream of the same seed. Stream 0 is what
/// [`make_draws`] returns.
pub fn make_draws_stream(seed: u64, stream: u64, s_draws: usize, design: &ExperimentDesign) -> Result<CrnDraws> {
    if s_draws == 0 {
        return Err(Error::Config("number of Monte Carlo draws must be at least 1".into()));
    }
    let (n1, n0) = (design.n1(), design.n0());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let u1 = (0..s_draws * n1).map(|_| rng.gen::<f64>()).collect();
    let u0 = (0..s_draws * n0).map(|_| rng.gen::<f64>()).collect();
    Ok(CrnDraws { seed, stream, s_draws, n1, n0, u1, u0 })
}

/// Equally spaced anchor grid `k / (resolution - 1)` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PGridSpec {
    pub resolution: usize,
    /// Pattern-search polish of the grid argmax on the continuous anchors.
    pub refine: bool,
}

impl Default for PGridSpec {
    fn default() -> Self {
        PGridSpec { resolution: 101, refine: false }
    }
}

impl PGridSpec {
    pub fn new(resolution: usize) -> Self {
        PGridSpec { resolution, refine: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::Config(format!(
                "anchor grid resolution must be at least 2 (got {}); no anchor pair with p1 != p0 exists",
                self.resolution
            )));
        }
        if self.resolution > u16::MAX as usize {
            return Err(Error::Config(format!("anchor grid resolution {} is too large", self.resolution)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let denom = (self.resolution - 1) as f64;
        (0..self.resolution).map(|k| k as f64 / denom).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `p1 > p0`: regret comes from failing to treat.
    TreatBetter,
    /// `p1 < p0`: regret comes from treating.
    ControlBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretSurfacePoint {
    pub p1: f64,
    pub p0: f64,
    pub regret: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxRegretEstimate {
    pub theta: f64,
    pub value: f64,
    pub argmax_point: RegretSurfacePoint,
    pub mc_standard_error: f64,
}

fn branch_regret(branch: Branch, p1: f64, p0: f64, acceptance: f64) -> f64 {
    match branch {
        Branch::TreatBetter => (p1 - p0) * (1.0 - acceptance),
        Branch::ControlBetter => (p0 - p1) * acceptance,
    }
}

fn fraction(count: u64, s: usize) -> f64 {
    count as f64 / s as f64
}

/// Number of draws for which the rule treats, with outcome thresholds
/// `t1[i]`, `t0[i]` at the sites (target point excluded).
fn count_accepts(rule: &RuleWeights, draws: &CrnDraws, t1: &[f64], t0: &[f64]) -> u64 {
    (0..draws.s_draws)
        .filter(|&s| {
            let s1: u64 =
                draws.u1(s).iter().zip(t1).zip(&rule.w1).filter(|((u, t), _)| *u <= *t).map(|(_, &w)| w).sum();
            let s0: u64 =
                draws.u0(s).iter().zip(t0).zip(&rule.w0).filter(|((u, t), _)| *u <= *t).map(|(_, &w)| w).sum();
            treats(s1, s0)
        })
        .count() as u64
}

struct Thresholds {
    r1: Vec<f64>,
    r0: Vec<f64>,
}

impl Thresholds {
    fn new(design: &ExperimentDesign) -> Self {
        Thresholds { r1: design.radii(Arm::Treated), r0: design.radii(Arm::Control) }
    }

    fn minus(&self, p1: f64, p0: f64) -> (Vec<f64>, Vec<f64>) {
        (self.r1.iter().map(|&r| clip_lower(p1, r)).collect(), self.r0.iter().map(|&r| clip_upper(p0, r)).collect())
    }

    fn plus(&self, p1: f64, p0: f64) -> (Vec<f64>, Vec<f64>) {
        (self.r1.iter().map(|&r| clip_upper(p1, r)).collect(), self.r0.iter().map(|&r| clip_lower(p0, r)).collect())
    }
}

fn rule_for(design: &ExperimentDesign, kernel: &KernelSpec, theta: f64) -> Result<RuleWeights> {
    Ok(RuleWeights::from_weights(&weights(design, kernel, theta)?))
}

/// Estimated acceptance probability at the configuration that is worst when
/// treatment is better: lower treated profile at `p1`, upper control profile
/// at `p0`.
pub fn acceptance_minus(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    draws: &CrnDraws,
    p1: f64,
    p0: f64,
) -> Result<f64> {
    acceptance(design, kernel, theta, draws, p1, p0, Branch::TreatBetter)
}

/// Mirror of [`acceptance_minus`]: upper treated profile, lower control profile.
pub fn acceptance_plus(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    draws: &CrnDraws,
    p1: f64,
    p0: f64,
) -> Result<f64> {
    acceptance(design, kernel, theta, draws, p1, p0, Branch::ControlBetter)
}

fn acceptance(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    draws: &CrnDraws,
    p1: f64,
    p0: f64,
    branch: Branch,
) -> Result<f64> {
    check_unit("treated anchor probability", p1)?;
    check_unit("control anchor probability", p0)?;
    draws.check_design(design)?;
    let rule = rule_for(design, kernel, theta)?;
    let th = Thresholds::new(design);
    let (t1, t0) = match branch {
        Branch::TreatBetter => th.minus(p1, p0),
        Branch::ControlBetter => th.plus(p1, p0),
    };
    Ok(fraction(count_accepts(&rule, draws, &t1, &t0), draws.s_draws))
}

/// Acceptance counts over the full anchor grid, `[k1 * G + k0]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceCounts {
    pub resolution: usize,
    pub minus: Vec<u32>,
    pub plus: Vec<u32>,
}

/// Grid index at which `1{u <= profile(p_k)}` switches on, `G` if never.
fn onset(u: f64, grid: &[f64], profile: impl Fn(f64) -> f64) -> u16 {
    grid.partition_point(|&p| u > profile(p)) as u16
}

/// Per-draw onset indices of the four clipped profiles. Independent of the
/// bandwidth, so one table serves a whole bandwidth search.
#[derive(Debug, Clone)]
struct OnsetTable {
    g: usize,
    n1: usize,
    n0: usize,
    t1_lo: Vec<u16>,
    t1_hi: Vec<u16>,
    t0_lo: Vec<u16>,
    t0_hi: Vec<u16>,
}

impl OnsetTable {
    fn build(design: &ExperimentDesign, draws: &CrnDraws, grid: &[f64]) -> Self {
        let r1 = design.radii(Arm::Treated);
        let r0 = design.radii(Arm::Control);
        let table = |u: &[f64], n: usize, radii: &[f64], upper: bool| -> Vec<u16> {
            u.iter()
                .enumerate()
                .map(|(idx, &v)| {
                    let r = radii[idx % n];
                    if upper {
                        onset(v, grid, |p| clip_upper(p, r))
                    } else {
                        onset(v, grid, |p| clip_lower(p, r))
                    }
                })
                .collect()
        };
        OnsetTable {
            g: grid.len(),
            n1: draws.n1,
            n0: draws.n0,
            t1_lo: table(&draws.u1, draws.n1, &r1, false),
            t1_hi: table(&draws.u1, draws.n1, &r1, true),
            t0_lo: table(&draws.u0, draws.n0, &r0, false),
            t0_hi: table(&draws.u0, draws.n0, &r0, true),
        }
    }

    fn s_draws(&self) -> usize {
        self.t1_lo.len() / self.n1
    }
}

/// Cumulative weighted sum of one arm over the anchor grid for one draw.
fn cumulate(onsets: &[u16], w: &[u64], out: &mut [u64]) {
    out.iter_mut().for_each(|v| *v = 0);
    let g = out.len();
    for (&k, &wi) in onsets.iter().zip(w) {
        if (k as usize) < g {
            out[k as usize] += wi;
        }
    }
    let mut acc = 0u64;
    for v in out.iter_mut() {
        acc += *v;
        *v = acc;
    }
}

/// `hist[k1 * (G + 1) + K] += 1` where `K` counts control indices `k0` with
/// `control[k0] <= treated[k1]`. Both sequences are nondecreasing.
fn sweep(treated: &[u64], control: &[u64], hist: &mut [u32]) {
    let g = treated.len();
    let mut k = 0usize;
    for (k1, &t) in treated.iter().enumerate() {
        while k < g && control[k] <= t {
            k += 1;
        }
        hist[k1 * (g + 1) + k] += 1;
    }
}

fn histograms_to_counts(hist: &[u32], g: usize) -> Vec<u32> {
    let mut counts = vec![0u32; g * g];
    for k1 in 0..g {
        let row = &hist[k1 * (g + 1)..(k1 + 1) * (g + 1)];
        let mut acc = 0u32;
        for k0 in (0..g).rev() {
            acc += row[k0 + 1];
            counts[k1 * g + k0] = acc;
        }
    }
    counts
}

const DRAW_CHUNK: usize = 2048;

fn surface_counts_fast(rule: &RuleWeights, table: &OnsetTable) -> SurfaceCounts {
    let g = table.g;
    let s_total = table.s_draws();
    let chunks: Vec<usize> = (0..s_total).step_by(DRAW_CHUNK).collect();
    let (hist_minus, hist_plus) = chunks
        .par_iter()
        .map(|&start| {
            let end = (start + DRAW_CHUNK).min(s_total);
            let mut hm = vec![0u32; g * (g + 1)];
            let mut hp = vec![0u32; g * (g + 1)];
            let mut c1lo = vec![0u64; g];
            let mut c1hi = vec![0u64; g];
            let mut c0lo = vec![0u64; g];
            let mut c0hi = vec![0u64; g];
            let (n1, n0) = (table.n1, table.n0);
            for s in start..end {
                cumulate(&table.t1_lo[s * n1..(s + 1) * n1], &rule.w1, &mut c1lo);
                cumulate(&table.t1_hi[s * n1..(s + 1) * n1], &rule.w1, &mut c1hi);
                cumulate(&table.t0_lo[s * n0..(s + 1) * n0], &rule.w0, &mut c0lo);
                cumulate(&table.t0_hi[s * n0..(s + 1) * n0], &rule.w0, &mut c0hi);
                sweep(&c1lo, &c0hi, &mut hm);
                sweep(&c1hi, &c0lo, &mut hp);
            }
            (hm, hp)
        })
        .reduce(
            || (vec![0u32; g * (g + 1)], vec![0u32; g * (g + 1)]),
            |(mut am, mut ap), (bm, bp)| {
                am.iter_mut().zip(&bm).for_each(|(a, b)| *a += b);
                ap.iter_mut().zip(&bp).for_each(|(a, b)| *a += b);
                (am, ap)
            },
        );
    SurfaceCounts {
        resolution: g,
        minus: histograms_to_counts(&hist_minus, g),
        plus: histograms_to_counts(&hist_plus, g),
    }
}

fn surface_counts_naive(rule: &RuleWeights, th: &Thresholds, draws: &CrnDraws, grid: &[f64]) -> SurfaceCounts {
    let g = grid.len();
    let mut minus = vec![0u32; g * g];
    let mut plus = vec![0u32; g * g];
    for (k1, &p1) in grid.iter().enumerate() {
        for (k0, &p0) in grid.iter().enumerate() {
            let (a, b) = th.minus(p1, p0);
            minus[k1 * g + k0] = count_accepts(rule, draws, &a, &b) as u32;
            let (a, b) = th.plus(p1, p0);
            plus[k1 * g + k0] = count_accepts(rule, draws, &a, &b) as u32;
        }
    }
    SurfaceCounts { resolution: g, minus, plus }
}

/// Grid argmax of both branches. Ties keep the first point in row-major
/// order, and the treat-better branch wins ties between branches.
fn select_max(counts: &SurfaceCounts, grid: &[f64], s: usize) -> (RegretSurfacePoint, f64) {
    let g = counts.resolution;
    let mut best: Option<(RegretSurfacePoint, f64)> = None;
    let mut consider = |branch: Branch, k1: usize, k0: usize, count: u32| {
        let acc = fraction(count as u64, s);
        let (p1, p0) = (grid[k1], grid[k0]);
        let regret = branch_regret(branch, p1, p0, acc);
        if best.as_ref().is_none_or(|(b, _)| regret > b.regret) {
            best = Some((RegretSurfacePoint { p1, p0, regret, branch }, acc));
        }
    };
    for k1 in 0..g {
        for k0 in 0..k1 {
            consider(Branch::TreatBetter, k1, k0, counts.minus[k1 * g + k0]);
        }
    }
    for k1 in 0..g {
        for k0 in k1 + 1..g {
            consider(Branch::ControlBetter, k1, k0, counts.plus[k1 * g + k0]);
        }
    }
    best.expect("grid with resolution >= 2 has off-diagonal points")
}

/// Evaluates the maximum regret at many bandwidths against one set of draws.
pub struct RegretEvaluator<'a> {
    design: &'a ExperimentDesign,
    draws: &'a CrnDraws,
    p_grid: PGridSpec,
    grid: Vec<f64>,
    table: OnsetTable,
}

impl<'a> RegretEvaluator<'a> {
    pub fn new(design: &'a ExperimentDesign, draws: &'a CrnDraws, p_grid: PGridSpec) -> Result<Self> {
        p_grid.validate()?;
        draws.check_design(design)?;
        let grid = p_grid.points();
        let table = OnsetTable::build(design, draws, &grid);
        Ok(RegretEvaluator { design, draws, p_grid, grid, table })
    }

    pub fn surface_counts(&self, kernel: &KernelSpec, theta: f64) -> Result<SurfaceCounts> {
        let rule = rule_for(self.design, kernel, theta)?;
        Ok(surface_counts_fast(&rule, &self.table))
    }

    pub fn max_regret(&self, kernel: &KernelSpec, theta: f64) -> Result<MaxRegretEstimate> {
        let rule = rule_for(self.design, kernel, theta)?;
        let counts = surface_counts_fast(&rule, &self.table);
        let (mut point, mut acc) = select_max(&counts, &self.grid, self.draws.s_draws);
        if self.p_grid.refine {
            (point, acc) = polish(&rule, &Thresholds::new(self.design), self.draws, point, acc, self.p_grid.resolution);
        }
        Ok(finish(theta, point, acc, self.draws.s_draws))
    }
}

fn finish(theta: f64, point: RegretSurfacePoint, acc: f64, s: usize) -> MaxRegretEstimate {
    MaxRegretEstimate {
        theta,
        value: point.regret,
        argmax_point: point,
        mc_standard_error: (point.p1 - point.p0).abs() * (acc * (1.0 - acc) / s as f64).sqrt(),
    }
}

/// Compass search on the continuous anchors of the argmax branch. Accepts
/// only strict improvements, so the result never falls below the grid value.
fn polish(
    rule: &RuleWeights,
    th: &Thresholds,
    draws: &CrnDraws,
    start: RegretSurfacePoint,
    start_acc: f64,
    resolution: usize,
) -> (RegretSurfacePoint, f64) {
    let eval = |p1: f64, p0: f64| -> Option<(f64, f64)> {
        let feasible = match start.branch {
            Branch::TreatBetter => p1 > p0,
            Branch::ControlBetter => p1 < p0,
        };
        if !feasible || !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p0) {
            return None;
        }
        let (t1, t0) = match start.branch {
            Branch::TreatBetter => th.minus(p1, p0),
            Branch::ControlBetter => th.plus(p1, p0),
        };
        let acc = fraction(count_accepts(rule, draws, &t1, &t0), draws.s_draws);
        Some((branch_regret(start.branch, p1, p0, acc), acc))
    };
    let (mut best, mut best_acc) = (start, start_acc);
    let mut step = 0.5 / (resolution - 1) as f64;
    let min_step = step * 1e-3;
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    while step >= min_step {
        let mut moved = false;
        for (d1, d0) in dirs {
            let (p1, p0) = (best.p1 + d1 * step, best.p0 + d0 * step);
            if let Some((r, acc)) = eval(p1, p0) {
                if r > best.regret {
                    best = RegretSurfacePoint { p1, p0, regret: r, branch: start.branch };
                    best_acc = acc;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (best, best_acc)
}

/// Maximum regret at one bandwidth over the anchor grid.
pub fn max_regret(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    draws: &CrnDraws,
    p_grid: PGridSpec,
) -> Result<MaxRegretEstimate> {
    RegretEvaluator::new(design, draws, p_grid)?.max_regret(kernel, theta)
}

/// Reference implementation of [`max_regret`] that evaluates every anchor
/// pair directly. `O(G^2 S n)`; meant for verification on small inputs.
pub fn max_regret_naive(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    draws: &CrnDraws,
    p_grid: PGridSpec,
) -> Result<MaxRegretEstimate> {
    p_grid.validate()?;
    draws.check_design(design)?;
    let rule = rule_for(design, kernel, theta)?;
    let grid = p_grid.points();
    let th = Thresholds::new(design);
    let counts = surface_counts_naive(&rule, &th, draws, &grid);
    let (mut point, mut acc) = select_max(&counts, &grid, draws.s_draws);
    if p_grid.refine {
        (point, acc) = polish(&rule, &th, draws, point, acc, p_grid.resolution);
    }
    Ok(finish(theta, point, acc, draws.s_draws))
}

/// Full-grid acceptance counts by direct evaluation.
pub fn surface_counts_reference(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    theta: f64,
    draws: &CrnDraws,
    p_grid: PGridSpec,
) -> Result<SurfaceCounts> {
    p_grid.validate()?;
    draws.check_design(design)?;
    let rule = rule_for(design, kernel, theta)?;
    Ok(surface_counts_naive(&rule, &Thresholds::new(design), draws, &p_grid.points()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::make_grid_design;
    use proptest::prelude::*;

    const K: KernelSpec = KernelSpec::GAUSSIAN;

    #[test]
    fn draws_are_deterministic_and_seed_sensitive() {
        let d = make_grid_design(4, 3, 0.1).unwrap();
        let a = make_draws(1, 1000, &d).unwrap();
        let b = make_draws(1, 1000, &d).unwrap();
        let c = make_draws(2, 1000, &d).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.u1, c.u1);
        assert_ne!(a.u0, c.u0);
        assert_ne!(a.u1, make_draws_stream(1, 1, 1000, &d).unwrap().u1);
        assert!(a.u1.iter().chain(&a.u0).all(|&u| (0.0..1.0).contains(&u)));
    }

    #[test]
    fn draw_columns_average_one_half() {
        let d = make_grid_design(3, 2, 0.1).unwrap();
        let dr = make_draws(11, 100_000, &d).unwrap();
        for i in 0..3 {
            let mean = (0..dr.s_draws()).map(|s| dr.u1(s)[i]).sum::<f64>() / dr.s_draws() as f64;
            assert!((mean - 0.5).abs() < 0.005, "column {i}: {mean}");
        }
    }

    #[test]
    fn zero_draws_rejected() {
        let d = make_grid_design(3, 2, 0.1).unwrap();
        assert!(matches!(make_draws(1, 0, &d), Err(Error::Config(_))));
    }

    #[test]
    fn degenerate_lipschitz_constant_is_deterministic() {
        let d = make_grid_design(4, 4, 0.0).unwrap();
        let dr = make_draws(3, 500, &d).unwrap();
        assert_eq!(acceptance_minus(&d, &K, 0.5, &dr, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(acceptance_minus(&d, &K, 0.5, &dr, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(acceptance_plus(&d, &K, 0.5, &dr, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(acceptance_plus(&d, &K, 0.5, &dr, 1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_draws_rejected() {
        let d = make_grid_design(4, 4, 0.1).unwrap();
        let other = make_grid_design(5, 4, 0.1).unwrap();
        let dr = make_draws(3, 10, &other).unwrap();
        assert!(matches!(acceptance_minus(&d, &K, 0.5, &dr, 0.5, 0.5), Err(Error::Dimension { .. })));
        assert!(matches!(max_regret(&d, &K, 0.5, &dr, PGridSpec::new(5)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn coarse_grid_rejected() {
        let d = make_grid_design(4, 4, 0.1).unwrap();
        let dr = make_draws(3, 10, &d).unwrap();
        assert!(matches!(max_regret(&d, &K, 0.5, &dr, PGridSpec::new(1)), Err(Error::Config(_))));
    }

    #[test]
    fn fast_counts_match_direct_evaluation() {
        for (n1, n0, c, theta) in
            [(3, 3, 0.2, 0.4), (4, 5, 0.7, 1.3), (6, 2, 0.05, 0.1), (5, 5, 0.0, 0.3), (3, 4, 3.0, 0.2)]
        {
            let d = make_grid_design(n1, n0, c).unwrap();
            let dr = make_draws(5, 300, &d).unwrap();
            let grid = PGridSpec::new(13);
            let fast = RegretEvaluator::new(&d, &dr, grid).unwrap().surface_counts(&K, theta).unwrap();
            let slow = surface_counts_reference(&d, &K, theta, &dr, grid).unwrap();
            assert_eq!(fast, slow, "n1={n1} n0={n0} c={c}");
            let a = max_regret(&d, &K, theta, &dr, grid).unwrap();
            let b = max_regret_naive(&d, &K, theta, &dr, grid).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn max_dominates_sample_point() {
        let d = make_grid_design(5, 5, 0.2).unwrap();
        let dr = make_draws(9, 2000, &d).unwrap();
        let est = max_regret(&d, &K, 0.4, &dr, PGridSpec::new(21)).unwrap();
        let pi = acceptance_minus(&d, &K, 0.4, &dr, 0.6, 0.4).unwrap();
        assert!(est.value >= (0.6 - 0.4) * (1.0 - pi));
        assert_eq!(est.value, est.argmax_point.regret);
        let gap = (est.argmax_point.p1 - est.argmax_point.p0).abs();
        assert!(est.mc_standard_error <= 0.5 / (2000f64).sqrt() * gap + 1e-15);
    }

    #[test]
    fn refinement_never_lowers_value() {
        let d = make_grid_design(4, 4, 0.3).unwrap();
        let dr = make_draws(2, 1000, &d).unwrap();
        let plain = max_regret(&d, &K, 0.5, &dr, PGridSpec::new(11)).unwrap();
        let refined = max_regret(&d, &K, 0.5, &dr, PGridSpec { resolution: 11, refine: true }).unwrap();
        assert!(refined.value >= plain.value);
        assert!(refined.value <= 1.0);
    }

    #[test]
    fn bit_identical_reruns() {
        let d = make_grid_design(6, 6, 0.2).unwrap();
        let a = max_regret(&d, &K, 0.3, &make_draws(4, 5000, &d).unwrap(), PGridSpec::default()).unwrap();
        let b = max_regret(&d, &K, 0.3, &make_draws(4, 5000, &d).unwrap(), PGridSpec::default()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn acceptance_is_monotone_in_anchors(
            seed in 0u64..1000,
            c in 0.0f64..1.0,
            theta in 0.05f64..2.0,
            p1 in 0.0f64..=1.0, p0 in 0.0f64..=1.0, bump in 0.0f64..0.3,
        ) {
            let d = make_grid_design(4, 3, c).unwrap();
            let dr = make_draws(seed, 400, &d).unwrap();
            let up1 = (p1 + bump).min(1.0);
            let up0 = (p0 + bump).min(1.0);
            for f in [acceptance_minus, acceptance_plus] {
                let base = f(&d, &K, theta, &dr, p1, p0).unwrap();
                prop_assert!((0.0..=1.0).contains(&base));
                prop_assert!(f(&d, &K, theta, &dr, up1, p0).unwrap() >= base);
                prop_assert!(f(&d, &K, theta, &dr, p1, up0).unwrap() <= base);
            }
        }

        #[test]
        fn regret_bounded_by_gap(seed in 0u64..1000, c in 0.0f64..1.0, theta in 0.05f64..2.0) {
            let d = make_grid_design(3, 3, c).unwrap();
            let dr = make_draws(seed, 200, &d).unwrap();
            let est = max_regret(&d, &K, theta, &dr, PGridSpec::new(11)).unwrap();
            let pt = est.argmax_point;
            prop_assert!(pt.regret >= 0.0 && pt.regret <= (pt.p1 - pt.p0).abs() + 1e-15);
            prop_assert!(pt.p1 != pt.p0);
        }
    }
}
