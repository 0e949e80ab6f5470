//! Maximum regret of the kernel plug-in rule when outcomes are Gaussian with
//! known standard deviation `sigma`.
//!
//! The estimator of the contrast is normal with standard deviation
//! `s(theta) = sigma * sqrt(sum w1^2 + sum w0^2)` and its worst-case bias over
//! the Lipschitz class is `b(theta) = C * (sum w1 |X1| + sum w0 |X0|)`. The
//! maximum regret is `s * eta(b / s)` with `eta(a) = max_{t>0} t * Phi(a - t)`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::bandwidth::{BandwidthSolution, CurvePoint, SolutionMethod, ThetaGridSpec};
use crate::design::{distance, Arm, ExperimentDesign};
use crate::error::{Error, Result};
use crate::kernel::{weights, KernelSpec, WeightVectors};

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalModelSpec {
    pub sigma: f64,
    pub design: ExperimentDesign,
    pub kernel: KernelSpec,
}

impl NormalModelSpec {
    pub fn new(design: ExperimentDesign, kernel: KernelSpec, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(NormalModelSpec { sigma, design, kernel })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalRegretBreakdown {
    pub theta: f64,
    pub s_theta: f64,
    pub b_theta: f64,
    pub value: f64,
    pub eta_argument: f64,
    pub eta_argmax_t: f64,
}

/// `max_{t > 0} t * Phi(a - t)`, returned as `(value, argmax)`.
///
/// The objective is log-concave in `t`, so its maximizer is the unique root of
/// `Phi(a - t) - t * phi(a - t)`, which is positive below the root and
/// negative above it.
pub fn eta(a: f64) -> (f64, f64) {
    let foc = |t: f64| std_normal_cdf(a - t) - t * std_normal_pdf(a - t);
    let objective = |t: f64| t * std_normal_cdf(a - t);
    let (mut lo, mut hi) = ((a - 10.0).max(1e-8), a + 10.0);
    let t = if foc(lo) > 0.0 && foc(hi) < 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if foc(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    } else {
        golden_max(objective, 1e-8, a.max(0.0) + 10.0, 1e-12)
    };
    (objective(t), t)
}

/// Golden-section search for the maximizer of a unimodal function.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

fn noise_scale(sigma: f64, w: &WeightVectors) -> f64 {
    let sq: f64 = w.w1.iter().chain(&w.w0).map(|v| v * v).sum();
    sigma * sq.sqrt()
}

fn worst_bias(design: &ExperimentDesign, w: &WeightVectors) -> f64 {
    let dot = |w: &[f64], arm| -> f64 { w.iter().zip(design.norms(arm)).map(|(a, b)| a * b).sum() };
    design.lipschitz_c() * (dot(&w.w1, Arm::Treated) + dot(&w.w0, Arm::Control))
}

pub fn normal_max_regret(spec: &NormalModelSpec, theta: f64) -> Result<NormalRegretBreakdown> {
    let w = weights(&spec.design, &spec.kernel, theta)?;
    let s = noise_scale(spec.sigma, &w);
    let b = worst_bias(&spec.design, &w);
    let (eta_value, t) = eta(b / s);
    Ok(NormalRegretBreakdown {
        theta,
        s_theta: s,
        b_theta: b,
        value: s * eta_value,
        eta_argument: b / s,
        eta_argmax_t: t,
    })
}

/// Largest value of `sum_i w_i p_i` over Lipschitz profiles of one arm with
/// the target-point value pinned at zero. Each `p_i` is bounded by its
/// shortest-path distance from the target in the graph with edge lengths
/// `C * distance`, and those distances form a feasible profile, so the
/// maximum is attained there.
fn arm_bias_bound(design: &ExperimentDesign, arm: Arm, w: &[f64]) -> f64 {
    let c = design.lipschitz_c();
    let mut pts = vec![vec![0.0; design.dim()]];
    pts.extend(design.covariates(arm).iter().cloned());
    let n = pts.len();
    // Dijkstra on the complete graph.
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let u =
            (0..n).filter(|&i| !done[i]).min_by(|&a, &b| dist[a].total_cmp(&dist[b])).expect("unvisited node remains");
        done[u] = true;
        for v in 0..n {
            if !done[v] {
                let alt = dist[u] + c * distance(&pts[u], &pts[v]);
                if alt < dist[v] {
                    dist[v] = alt;
                }
            }
        }
    }
    w.iter().zip(&dist[1..]).map(|(a, b)| a * b).sum()
}

/// Maximum regret by direct maximization over the anchor gap `t`.
///
/// For a gap `t = p1(0) - p0(0) > 0` the regret is
/// `t * Phi(-(t + bias) / s)` where the least favourable bias is found by a
/// shortest-path computation per arm; the gap is then located by a scan of
/// `anchor_grid_resolution` points followed by golden-section refinement.
/// Shares nothing with [`normal_max_regret`] beyond the weights.
pub fn normal_max_regret_direct(spec: &NormalModelSpec, theta: f64, anchor_grid_resolution: usize) -> Result<f64> {
    if anchor_grid_resolution < 3 {
        return Err(Error::Config(format!("gap grid resolution must be at least 3, got {anchor_grid_resolution}")));
    }
    let w = weights(&spec.design, &spec.kernel, theta)?;
    let s = spec.sigma * (w.w1.iter().map(|v| v * v).sum::<f64>() + w.w0.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let bias = arm_bias_bound(&spec.design, Arm::Treated, &w.w1) + arm_bias_bound(&spec.design, Arm::Control, &w.w0);
    let regret = |t: f64| t * std_normal_cdf(-(t - bias) / s);
    // The maximizing gap lies below bias + 10 s: beyond it the tail factor
    // decays faster than t grows.
    let upper = bias + 10.0 * s;
    let step = upper / (anchor_grid_resolution - 1) as f64;
    let best_k = (1..anchor_grid_resolution)
        .max_by(|&a, &b| regret(a as f64 * step).total_cmp(&regret(b as f64 * step)))
        .expect("nonempty scan");
    let lo = ((best_k - 1) as f64 * step).max(1e-12);
    let hi = ((best_k + 1) as f64 * step).min(upper);
    let t = golden_max(regret, lo, hi, 1e-13 * upper.max(1.0));
    Ok(regret(t).max(regret(best_k as f64 * step)))
}

/// Rounds of local grid refinement around the coarse argmin.
const REFINE_ROUNDS: usize = 3;
const REFINE_POINTS: usize = 21;

pub fn normal_optimal_bandwidth(spec: &NormalModelSpec, theta_grid: &ThetaGridSpec) -> Result<BandwidthSolution> {
    let thetas = theta_grid.points()?;
    let eval = |t: f64| normal_max_regret(spec, t).map(|b| b.value);
    let mut curve = Vec::with_capacity(thetas.len() + 1);
    for &t in &thetas {
        match eval(t) {
            Ok(v) => curve.push(CurvePoint { theta: t, regret: v, se: 0.0 }),
            Err(Error::DegenerateBandwidth { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if curve.is_empty() {
        return Err(Error::NoFeasibleBandwidth);
    }
    let k = argmin(&curve);
    let (mut lo, mut hi) = (curve[k.saturating_sub(1)].theta, curve[(k + 1).min(curve.len() - 1)].theta);
    let (mut best_t, mut best_v) = (curve[k].theta, curve[k].regret);
    for _ in 0..REFINE_ROUNDS {
        let step = (hi - lo) / (REFINE_POINTS - 1) as f64;
        if step <= 0.0 {
            break;
        }
        for j in 0..REFINE_POINTS {
            let t = lo + j as f64 * step;
            if let Ok(v) = eval(t) {
                if v < best_v {
                    best_v = v;
                    best_t = t;
                }
            }
        }
        lo = (best_t - step).max(lo);
        hi = (best_t + step).min(hi);
    }
    if !curve.iter().any(|p| p.theta == best_t) {
        let pos = curve.partition_point(|p| p.theta < best_t);
        curve.insert(pos, CurvePoint { theta: best_t, regret: best_v, se: 0.0 });
    }
    Ok(BandwidthSolution {
        theta_star: best_t,
        plateau: (best_t, best_t),
        min_regret: best_v,
        curve,
        method: SolutionMethod::NormalClosedForm,
    })
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
