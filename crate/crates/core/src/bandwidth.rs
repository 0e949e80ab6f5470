//! Outer minimization of the maximum regret over the bandwidth.
//!
//! With finitely many draws the Monte Carlo maximum regret is a step function
//! of the bandwidth, so the binary search stops at the grid: it reports the
//! grid argmin together with the plateau of bandwidths whose regret is within
//! tolerance of the minimum. The Gaussian benchmark is smooth and is refined
//! locally instead (see [`crate::normal::normal_optimal_bandwidth`]).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{make_grid_design, ExperimentDesign};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mc::{make_draws, make_draws_stream, CrnDraws, MaxRegretEstimate, PGridSpec, RegretEvaluator};
use crate::normal::{normal_optimal_bandwidth, NormalModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Spacing::Log),
            "linear" => Ok(Spacing::Linear),
            other => Err(Error::Config(format!("unknown spacing {other:?} (expected log or linear)"))),
        }
    }
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spacing::Log => "log",
            Spacing::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaGridSpec {
    pub theta_min: f64,
    pub theta_max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

pub const DEFAULT_THETA_COUNT: usize = 60;

impl ThetaGridSpec {
    pub fn log(theta_min: f64, theta_max: f64, count: usize) -> Self {
        ThetaGridSpec { theta_min, theta_max, count, spacing: Spacing::Log }
    }

    /// Half the smallest nonzero covariate distance to the target up to four
    /// times the covariate diameter, 60 log-spaced points.
    pub fn default_for(design: &ExperimentDesign) -> Result<Self> {
        let min = design
            .min_nonzero_norm()
            .ok_or_else(|| Error::InvalidDesign("every covariate sits at the target point".into()))?;
        let diameter = design.diameter();
        let max = if diameter > 0.0 { 4.0 * diameter } else { 4.0 * min };
        Ok(ThetaGridSpec::log(0.5 * min, max, DEFAULT_THETA_COUNT))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min.is_finite() && self.theta_min > 0.0) {
            return Err(Error::Config(format!("theta-min must be positive, got {}", self.theta_min)));
        }
        if !(self.theta_max.is_finite() && self.theta_max > self.theta_min) {
            return Err(Error::Config(format!(
                "theta-max ({}) must exceed theta-min ({})",
                self.theta_max, self.theta_min
            )));
        }
        if self.count < 2 {
            return Err(Error::Config(format!("theta grid needs at least 2 points, got {}", self.count)));
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let last = self.count - 1;
        Ok((0..self.count)
            .map(|k| {
                if k == 0 {
                    return self.theta_min;
                }
                if k == last {
                    return self.theta_max;
                }
                let frac = k as f64 / last as f64;
                match self.spacing {
                    Spacing::Log => (self.theta_min.ln() + frac * (self.theta_max.ln() - self.theta_min.ln())).exp(),
                    Spacing::Linear => self.theta_min + frac * (self.theta_max - self.theta_min),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub regret: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionMethod {
    BinaryMc,
    NormalClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSolution {
    pub theta_star: f64,
    pub plateau: (f64, f64),
    pub min_regret: f64,
    pub curve: Vec<CurvePoint>,
    pub method: SolutionMethod,
}

/// Tolerance for plateau membership: `max(abs_tol, z * se)` where `se` is the
/// Monte Carlo standard error at the argmin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauRule {
    pub abs_tol: f64,
    pub z: f64,
}

impl Default for PlateauRule {
    fn default() -> Self {
        PlateauRule { abs_tol: 1e-4, z: 1.0 }
    }
}

impl PlateauRule {
    /// Default rule for a draw-sharing scope. Under global common random
    /// numbers the curve has no draw-to-draw noise between bandwidths, so only
    /// the absolute floor applies.
    pub fn default_for(scope: CrnScope) -> Self {
        match scope {
            CrnScope::Global => PlateauRule { abs_tol: 1e-4, z: 0.0 },
            CrnScope::PerTheta => PlateauRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CrnScope {
    /// One set of draws for every bandwidth.
    #[default]
    Global,
    /// Fresh draws (an independent stream of the same seed) per bandwidth.
    PerTheta,
}

impl FromStr for CrnScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(CrnScope::Global),
            "per-theta" => Ok(CrnScope::PerTheta),
            other => Err(Error::Config(format!("unknown CRN scope {other:?} (expected global or per-theta)"))),
        }
    }
}

impl fmt::Display for CrnScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CrnScope::Global => "global",
            CrnScope::PerTheta => "per-theta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySearchConfig {
    pub seed: u64,
    pub s_draws: usize,
    pub crn_scope: CrnScope,
    pub p_grid: PGridSpec,
    pub plateau: PlateauRule,
}

impl Default for BinarySearchConfig {
    fn default() -> Self {
        BinarySearchConfig {
            seed: 1,
            s_draws: 10_000,
            crn_scope: CrnScope::Global,
            p_grid: PGridSpec::default(),
            plateau: PlateauRule::default_for(CrnScope::Global),
        }
    }
}

/// Largest contiguous run of curve points around the (first) argmin whose
/// regret lies within the rule's tolerance of the minimum.
pub fn plateau_detect(curve: &[CurvePoint], rule: &PlateauRule) -> Result<(f64, f64)> {
    let (lo, hi) = plateau_indices(curve, rule)?;
    Ok((curve[lo].theta, curve[hi].theta))
}

fn plateau_indices(curve: &[CurvePoint], rule: &PlateauRule) -> Result<(usize, usize)> {
    if curve.is_empty() {
        return Err(Error::Config("cannot detect a plateau on an empty curve".into()));
    }
    let k = argmin(curve);
    let tol = rule.abs_tol.max(rule.z * curve[k].se);
    let limit = curve[k].regret + tol;
    let mut lo = k;
    while lo > 0 && curve[lo - 1].regret <= limit {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < curve.len() && curve[hi + 1].regret <= limit {
        hi += 1;
    }
    Ok((lo, hi))
}

fn argmin(curve: &[CurvePoint]) -> usize {
    let mut best = 0;
    for (i, p) in curve.iter().enumerate() {
        if p.regret < curve[best].regret {
            best = i;
        }
    }
    best
}

/// Builds the solution from an evaluated curve: the reported bandwidth is the
/// grid minimizer closest (in log scale) to the geometric midpoint of the
/// plateau, so it is both a global grid minimizer and central in the plateau.
fn solution_from_curve(curve: Vec<CurvePoint>, rule: &PlateauRule) -> Result<BandwidthSolution> {
    if curve.is_empty() {
        return Err(Error::NoFeasibleBandwidth);
    }
    let (lo, hi) = plateau_indices(&curve, rule)?;
    let min_regret = curve[argmin(&curve)].regret;
    let mid = (curve[lo].theta.ln() + curve[hi].theta.ln()) / 2.0;
    let star = (lo..=hi)
        .filter(|&i| curve[i].regret == min_regret)
        .min_by(|&a, &b| (curve[a].theta.ln() - mid).abs().total_cmp(&(curve[b].theta.ln() - mid).abs()))
        .expect("plateau contains the argmin");
    Ok(BandwidthSolution {
        theta_star: curve[star].theta,
        plateau: (curve[lo].theta, curve[hi].theta),
        min_regret,
        curve,
        method: SolutionMethod::BinaryMc,
    })
}

fn to_point(est: MaxRegretEstimate) -> CurvePoint {
    CurvePoint { theta: est.theta, regret: est.value, se: est.mc_standard_error }
}

/// Keeps successful evaluations, drops bandwidths with degenerate weights and
/// propagates every other error.
fn collect_curve(results: Vec<Result<MaxRegretEstimate>>) -> Result<Vec<CurvePoint>> {
    let mut curve = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(est) => curve.push(to_point(est)),
            Err(Error::DegenerateBandwidth { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}

/// Monte Carlo maximum regret at every grid bandwidth.
pub fn regret_curve(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    cfg: &BinarySearchConfig,
    theta_grid: &ThetaGridSpec,
) -> Result<Vec<CurvePoint>> {
    let thetas = theta_grid.points()?;
    let results: Vec<Result<MaxRegretEstimate>> = match cfg.crn_scope {
        CrnScope::Global => {
            let draws = make_draws(cfg.seed, cfg.s_draws, design)?;
            let eval = RegretEvaluator::new(design, &draws, cfg.p_grid)?;
            thetas.par_iter().map(|&t| eval.max_regret(kernel, t)).collect()
        }
        CrnScope::PerTheta => {
            cfg.p_grid.validate()?;
            thetas
                .par_iter()
                .enumerate()
                .map(|(j, &t)| {
                    let draws = make_draws_stream(cfg.seed, j as u64 + 1, cfg.s_draws, design)?;
                    RegretEvaluator::new(design, &draws, cfg.p_grid)?.max_regret(kernel, t)
                })
                .collect()
        }
    };
    collect_curve(results)
}

pub fn optimize_bandwidth(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    cfg: &BinarySearchConfig,
    theta_grid: &ThetaGridSpec,
) -> Result<BandwidthSolution> {
    solution_from_curve(regret_curve(design, kernel, cfg, theta_grid)?, &cfg.plateau)
}

/// Bandwidth search against caller-supplied draws shared by all bandwidths.
pub fn optimize_bandwidth_with_draws(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    draws: &CrnDraws,
    p_grid: PGridSpec,
    theta_grid: &ThetaGridSpec,
    rule: &PlateauRule,
) -> Result<BandwidthSolution> {
    let thetas = theta_grid.points()?;
    let eval = RegretEvaluator::new(design, draws, p_grid)?;
    let results = thetas.par_iter().map(|&t| eval.max_regret(kernel, t)).collect();
    solution_from_curve(collect_curve(results)?, rule)
}

/// Binary and Gaussian bandwidth choices for one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub lipschitz_c: f64,
    pub n1: usize,
    pub n0: usize,
    pub binary_theta_star: f64,
    pub binary_plateau: (f64, f64),
    pub binary_min_regret: f64,
    pub normal_theta_star: f64,
    pub normal_min_regret: f64,
    /// The Gaussian choice falls outside the binary plateau widened by one
    /// grid step on each side.
    pub divergent: bool,
}

pub fn compare_binary_normal(
    design: &ExperimentDesign,
    kernel: &KernelSpec,
    cfg: &BinarySearchConfig,
    theta_grid: &ThetaGridSpec,
    sigma: f64,
) -> Result<ComparisonRow> {
    let binary = optimize_bandwidth(design, kernel, cfg, theta_grid)?;
    let normal = normal_optimal_bandwidth(&NormalModelSpec::new(design.clone(), *kernel, sigma)?, theta_grid)?;
    let thetas = theta_grid.points()?;
    let widen = |t: f64, dir: isize| -> f64 {
        let i = thetas.iter().position(|&x| x == t).unwrap_or(0) as isize + dir;
        thetas[i.clamp(0, thetas.len() as isize - 1) as usize]
    };
    let (lo, hi) = (widen(binary.plateau.0, -1), widen(binary.plateau.1, 1));
    Ok(ComparisonRow {
        lipschitz_c: design.lipschitz_c(),
        n1: design.n1(),
        n0: design.n0(),
        binary_theta_star: binary.theta_star,
        binary_plateau: binary.plateau,
        binary_min_regret: binary.min_regret,
        normal_theta_star: normal.theta_star,
        normal_min_regret: normal.min_regret,
        divergent: normal.theta_star < lo || normal.theta_star > hi,
    })
}

pub const TABLE_LIPSCHITZ: [f64; 3] = [0.1, 0.2, 0.3];
pub const TABLE_SAMPLE_SIZES: [usize; 4] = [10, 50, 100, 200];

/// Bandwidth grid used for the comparison table: wide enough to contain
/// every binary and Gaussian choice of the grid designs with `n <= 200`.
pub fn table_theta_grid() -> ThetaGridSpec {
    ThetaGridSpec::log(0.05, 2.0, DEFAULT_THETA_COUNT)
}

/// Comparison rows over `lipschitz × sample_sizes` on equidistant grid
/// designs with `n1 = n0 = n / 2`, in `(C, n)` order.
pub fn reference_table(
    lipschitz: &[f64],
    sample_sizes: &[usize],
    kernel: &KernelSpec,
    cfg: &BinarySearchConfig,
    theta_grid: &ThetaGridSpec,
    sigma: f64,
) -> Result<Vec<ComparisonRow>> {
    if let Some(n) = sample_sizes.iter().find(|&&n| n % 2 != 0 || n < 4) {
        return Err(Error::Config(format!("table sample sizes must be even and at least 4, got {n}")));
    }
    let cells: Vec<(f64, usize)> = lipschitz.iter().flat_map(|&c| sample_sizes.iter().map(move |&n| (c, n))).collect();
    cells
        .par_iter()
        .map(|&(c, n)| {
            let design = make_grid_design(n / 2, n / 2, c)?;
            compare_binary_normal(&design, kernel, cfg, theta_grid, sigma)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(values: &[f64]) -> Vec<CurvePoint> {
        values
            .iter()
            .enumerate()
            .map(|(i, &r)| CurvePoint { theta: 0.1 * (i + 1) as f64, regret: r, se: 0.0 })
            .collect()
    }

    #[test]
    fn log_grid_endpoints() {
        let g = ThetaGridSpec::log(0.05, 2.0, 60).points().unwrap();
        assert_eq!(g.len(), 60);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[59], 2.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let ratio = g[1] / g[0];
        assert!((g[30] / g[29] - ratio).abs() < 1e-12);
    }

    #[test]
    fn linear_grid() {
        let g = ThetaGridSpec { theta_min: 1.0, theta_max: 2.0, count: 5, spacing: Spacing::Linear };
        assert_eq!(g.points().unwrap(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn invalid_grids() {
        assert!(ThetaGridSpec::log(0.0, 1.0, 10).points().is_err());
        assert!(ThetaGridSpec::log(1.0, 0.5, 10).points().is_err());
        assert!(ThetaGridSpec::log(0.1, 1.0, 1).points().is_err());
    }

    #[test]
    fn default_grid_from_design() {
        let d = make_grid_design(5, 5, 0.1).unwrap();
        let g = ThetaGridSpec::default_for(&d).unwrap();
        assert_eq!(g.theta_min, 0.25);
        assert_eq!(g.theta_max, 8.0);
        assert_eq!(g.count, 60);
    }

    #[test]
    fn convex_curve_has_point_plateau() {
        let c = curve(&[0.5, 0.3, 0.2, 0.25, 0.4]);
        assert_eq!(plateau_detect(&c, &PlateauRule::default()).unwrap(), (0.30000000000000004, 0.30000000000000004));
    }

    #[test]
    fn constant_curve_is_one_plateau() {
        let c = curve(&[0.7; 6]);
        let (lo, hi) = plateau_detect(&c, &PlateauRule::default()).unwrap();
        assert_eq!((lo, hi), (c[0].theta, c[5].theta));
        let sol = solution_from_curve(c, &PlateauRule::default()).unwrap();
        assert!(sol.theta_star >= lo && sol.theta_star <= hi);
    }

    #[test]
    fn plateau_stops_at_first_excursion() {
        let c = curve(&[0.3, 0.2, 0.20005, 0.2, 0.21, 0.2]);
        let (lo, hi) = plateau_detect(&c, &PlateauRule::default()).unwrap();
        assert_eq!((lo, hi), (c[1].theta, c[3].theta));
    }

    #[test]
    fn standard_error_widens_plateau() {
        let mut c = curve(&[0.3, 0.2, 0.201, 0.2005, 0.25]);
        c[1].se = 0.002;
        let (lo, hi) = plateau_detect(&c, &PlateauRule { abs_tol: 1e-4, z: 1.0 }).unwrap();
        assert_eq!((lo, hi), (c[1].theta, c[3].theta));
        let (lo, hi) = plateau_detect(&c, &PlateauRule { abs_tol: 1e-4, z: 0.0 }).unwrap();
        assert_eq!((lo, hi), (c[1].theta, c[1].theta));
    }

    #[test]
    fn empty_curve() {
        assert!(plateau_detect(&[], &PlateauRule::default()).is_err());
        assert!(matches!(solution_from_curve(vec![], &PlateauRule::default()), Err(Error::NoFeasibleBandwidth)));
    }

    #[test]
    fn star_is_grid_minimizer_near_plateau_middle() {
        let c = curve(&[0.3, 0.2, 0.20005, 0.2, 0.2, 0.2, 0.20002, 0.5]);
        let sol = solution_from_curve(c.clone(), &PlateauRule::default()).unwrap();
        assert_eq!(sol.plateau, (c[1].theta, c[6].theta));
        assert_eq!(sol.min_regret, 0.2);
        assert!(c.iter().all(|p| p.regret >= sol.min_regret));
        let star = c.iter().find(|p| p.theta == sol.theta_star).unwrap();
        assert_eq!(star.regret, 0.2);
    }

    #[test]
    fn parse_options() {
        assert_eq!("per-theta".parse::<CrnScope>().unwrap(), CrnScope::PerTheta);
        assert!("sometimes".parse::<CrnScope>().is_err());
        assert_eq!("linear".parse::<Spacing>().unwrap(), Spacing::Linear);
    }

    #[test]
    fn all_degenerate_bandwidths() {
        use crate::kernel::KernelFamily;
        let d = ExperimentDesign::from_scalars(&[1.0, 2.0], &[1.5], 0.1).unwrap();
        let cfg = BinarySearchConfig { s_draws: 50, p_grid: PGridSpec::new(5), ..Default::default() };
        let err =
            optimize_bandwidth(&d, &KernelSpec::new(KernelFamily::Uniform), &cfg, &ThetaGridSpec::log(0.1, 0.5, 4))
                .unwrap_err();
        assert_eq!(err, Error::NoFeasibleBandwidth);
    }

    #[test]
    fn odd_table_sizes_rejected() {
        let cfg = BinarySearchConfig::default();
        assert!(reference_table(&[0.1], &[11], &KernelSpec::GAUSSIAN, &cfg, &table_theta_grid(), 0.5).is_err());
    }
}
