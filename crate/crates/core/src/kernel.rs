//! Nonnegative kernels, normalized regression weights and the plug-in rule.
//!
//! The rule treats when the weighted treated mean minus the weighted control
//! mean is `>= 0`. Its sign is evaluated on fixed-point copies of the weights
//! (see [`RuleWeights`]) so that every subset sum is exact: the answer does
//! not depend on summation order, ties are genuine ties, and the Monte Carlo
//! fast path agrees with the direct evaluation decision for decision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{Arm, ExperimentDesign};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Gaussian,
    Uniform,
    Epanechnikov,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Uniform => "uniform",
            KernelFamily::Epanechnikov => "epanechnikov",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "uniform" => Ok(KernelFamily::Uniform),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            other => {
                Err(Error::Config(format!("unknown kernel {other:?} (expected gaussian, uniform or epanechnikov)")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct KernelSpec {
    pub family: KernelFamily,
}

impl KernelSpec {
    pub const GAUSSIAN: KernelSpec = KernelSpec { family: KernelFamily::Gaussian };

    pub fn new(family: KernelFamily) -> Self {
        KernelSpec { family }
    }

    /// Kernel value at a point with squared Euclidean norm `sq_norm`. The
    /// Gaussian normalizing constant is dropped; it cancels in the weights.
    pub fn eval_sq(&self, sq_norm: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-0.5 * sq_norm).exp(),
            KernelFamily::Uniform => {
                if sq_norm <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Epanechnikov => (1.0 - sq_norm).max(0.0),
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.eval_sq(u.iter().map(|v| v * v).sum())
    }
}

/// Normalized kernel weights of both arms at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVectors {
    pub w1: Vec<f64>,
    pub w0: Vec<f64>,
    pub theta: f64,
}

pub fn weights(design: &ExperimentDesign, kernel: &KernelSpec, theta: f64) -> Result<WeightVectors> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::Config(format!("bandwidth must be positive and finite, got {theta}")));
    }
    Ok(WeightVectors {
        w1: arm_weights(design, Arm::Treated, kernel, theta)?,
        w0: arm_weights(design, Arm::Control, kernel, theta)?,
        theta,
    })
}

fn arm_weights(design: &ExperimentDesign, arm: Arm, kernel: &KernelSpec, theta: f64) -> Result<Vec<f64>> {
    let sq: Vec<f64> =
        design.covariates(arm).iter().map(|x| x.iter().map(|v| (v / theta) * (v / theta)).sum()).collect();
    let raw: Vec<f64> = match kernel.family {
        // Shift the exponent by its maximum so the largest weight is exp(0).
        KernelFamily::Gaussian => {
            let min_sq = sq.iter().copied().fold(f64::INFINITY, f64::min);
            sq.iter().map(|&s| (-0.5 * (s - min_sq)).exp()).collect()
        }
        _ => sq.iter().map(|&s| kernel.eval_sq(s)).collect(),
    };
    normalize(&raw).ok_or(Error::DegenerateBandwidth { arm, theta })
}

/// Scale raw nonnegative kernel values to sum to one. `None` if the total is
/// zero or not finite.
pub fn normalize(raw: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        Some(raw.iter().map(|v| v / total).collect())
    } else {
        None
    }
}

/// Number of fractional bits of the fixed-point rule weights.
pub const RULE_WEIGHT_BITS: i32 = 52;
const RULE_SCALE: f64 = (1u64 << RULE_WEIGHT_BITS) as f64;

/// Weights rounded to multiples of `2^-52`, held as integers.
///
/// Weights below `2^-53` round to zero, which is below the resolution a
/// double-precision sum of order one has anyway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleWeights {
    pub w1: Vec<u64>,
    pub w0: Vec<u64>,
}

impl RuleWeights {
    pub fn from_weights(w: &WeightVectors) -> Self {
        let q = |v: &[f64]| v.iter().map(|&x| (x * RULE_SCALE).round() as u64).collect();
        RuleWeights { w1: q(&w.w1), w0: q(&w.w0) }
    }

    pub fn treated_sum(&self, y1: &[bool]) -> u64 {
        masked_sum(&self.w1, y1)
    }

    pub fn control_sum(&self, y0: &[bool]) -> u64 {
        masked_sum(&self.w0, y0)
    }
}

fn masked_sum(w: &[u64], y: &[bool]) -> u64 {
    w.iter().zip(y).filter(|(_, &on)| on).map(|(&v, _)| v).sum()
}

/// The plug-in rule: treat iff the weighted contrast is nonnegative.
#[inline]
pub fn treats(treated_sum: u64, control_sum: u64) -> bool {
    treated_sum >= control_sum
}

/// Weighted treated mean minus weighted control mean for binary outcomes.
pub fn decision_statistic(weights: &WeightVectors, y1: &[bool], y0: &[bool]) -> Result<f64> {
    if y1.len() != weights.w1.len() {
        return Err(Error::Dimension { what: "treated outcomes", expected: weights.w1.len(), got: y1.len() });
    }
    if y0.len() != weights.w0.len() {
        return Err(Error::Dimension { what: "control outcomes", expected: weights.w0.len(), got: y0.len() });
    }
    let rule = RuleWeights::from_weights(weights);
    let s1 = rule.treated_sum(y1) as f64;
    let s0 = rule.control_sum(y0) as f64;
    Ok((s1 - s0) / RULE_SCALE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::make_grid_design;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn symmetric_pair_gets_equal_weights() {
        let d = make_grid_design(2, 2, 0.1).unwrap();
        for theta in [0.01, 0.3, 1.0, 50.0] {
            let w = weights(&d, &KernelSpec::GAUSSIAN, theta).unwrap();
            assert_eq!(w.w1, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn large_bandwidth_gives_uniform_weights() {
        let d = make_grid_design(7, 4, 0.1).unwrap();
        let w = weights(&d, &KernelSpec::GAUSSIAN, 1e6).unwrap();
        assert!(w.w1.iter().all(|&v| close(v, 1.0 / 7.0, 1e-10)));
        assert!(w.w0.iter().all(|&v| close(v, 0.25, 1e-10)));
    }

    #[test]
    fn two_point_example() {
        let d = ExperimentDesign::from_scalars(&[0.5, 1.0], &[-1.0, 1.0], 0.1).unwrap();
        let w = weights(&d, &KernelSpec::GAUSSIAN, 0.5).unwrap();
        let (a, b) = ((-0.5f64).exp(), (-2.0f64).exp());
        assert!(close(w.w1[0], a / (a + b), 1e-15));
        assert!(close(w.w1[0], 0.8176, 1e-4));
        assert!(close(w.w1[1], 0.1824, 1e-4));
    }

    #[test]
    fn tiny_bandwidth_does_not_underflow() {
        let d = ExperimentDesign::from_scalars(&[0.5, 1.0], &[0.7, 0.9], 0.1).unwrap();
        let w = weights(&d, &KernelSpec::GAUSSIAN, 1e-3).unwrap();
        assert_eq!(w.w1, vec![1.0, 0.0]);
        assert_eq!(w.w0, vec![1.0, 0.0]);
    }

    #[test]
    fn compact_kernel_with_small_bandwidth_is_degenerate() {
        let d = ExperimentDesign::from_scalars(&[0.0, 1.0], &[0.5, 1.0], 0.1).unwrap();
        for family in [KernelFamily::Uniform, KernelFamily::Epanechnikov] {
            let err = weights(&d, &KernelSpec::new(family), 0.2).unwrap_err();
            assert_eq!(err, Error::DegenerateBandwidth { arm: Arm::Control, theta: 0.2 });
        }
        assert!(weights(&d, &KernelSpec::new(KernelFamily::Uniform), 0.6).is_ok());
    }

    #[test]
    fn kernel_values() {
        let k = KernelSpec::new(KernelFamily::Epanechnikov);
        assert_eq!(k.eval(&[0.0]), 1.0);
        assert!(close(k.eval(&[0.5]), 0.75, 1e-15));
        assert_eq!(k.eval(&[1.5]), 0.0);
        let u = KernelSpec::new(KernelFamily::Uniform);
        assert_eq!(u.eval(&[1.0]), 1.0);
        assert_eq!(u.eval(&[0.6, 0.9]), 0.0);
        assert!(close(KernelSpec::GAUSSIAN.eval(&[1.0]), (-0.5f64).exp(), 1e-15));
    }

    #[test]
    fn kernel_names_parse() {
        assert_eq!("Gaussian".parse::<KernelFamily>().unwrap(), KernelFamily::Gaussian);
        assert_eq!("epanechnikov".parse::<KernelFamily>().unwrap(), KernelFamily::Epanechnikov);
        assert!(matches!("triangular".parse::<KernelFamily>(), Err(Error::Config(_))));
    }

    #[test]
    fn statistic_examples() {
        let d = make_grid_design(3, 4, 0.1).unwrap();
        let w = weights(&d, &KernelSpec::GAUSSIAN, 0.4).unwrap();
        let s = decision_statistic(&w, &[true; 3], &[false; 4]).unwrap();
        assert!(close(s, 1.0, 1e-12));
        let s = decision_statistic(&w, &[false; 3], &[false; 4]).unwrap();
        assert_eq!(s, 0.0);
        assert!(s >= 0.0);

        let w = WeightVectors { w1: vec![0.8176, 0.1824], w0: vec![0.5, 0.5], theta: 0.5 };
        let s = decision_statistic(&w, &[false, true], &[true, false]).unwrap();
        assert!(close(s, -0.3176, 1e-12));

        assert!(matches!(decision_statistic(&w, &[true], &[true, false]), Err(Error::Dimension { .. })));
    }

    proptest! {
        #[test]
        fn weights_normalized(
            x1 in prop::collection::vec(-3.0f64..3.0, 1..12),
            x0 in prop::collection::vec(-3.0f64..3.0, 1..12),
            log_theta in -4.0f64..3.0,
        ) {
            let d = ExperimentDesign::from_scalars(&x1, &x0, 0.1).unwrap();
            let w = weights(&d, &KernelSpec::GAUSSIAN, log_theta.exp()).unwrap();
            for v in [&w.w1, &w.w0] {
                prop_assert!(v.iter().all(|&x| x >= 0.0));
                prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn kernel_scale_cancels(raw in prop::collection::vec(0.0f64..5.0, 1..10), c in 0.01f64..100.0) {
            prop_assume!(raw.iter().sum::<f64>() > 0.0);
            let a = normalize(&raw).unwrap();
            let scaled: Vec<f64> = raw.iter().map(|v| v * c).collect();
            let b = normalize(&scaled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-14);
            }
        }

        #[test]
        fn weights_follow_permutation(
            x1 in prop::collection::vec(-2.0f64..2.0, 2..8),
            rot in 0usize..8,
            theta in 0.05f64..3.0,
        ) {
            let mut perm = x1.clone();
            let k = rot % x1.len();
            perm.rotate_left(k);
            let a = weights(&ExperimentDesign::from_scalars(&x1, &[1.0], 0.1).unwrap(), &KernelSpec::GAUSSIAN, theta).unwrap();
            let b = weights(&ExperimentDesign::from_scalars(&perm, &[1.0], 0.1).unwrap(), &KernelSpec::GAUSSIAN, theta).unwrap();
            let mut restored = b.w1.clone();
            restored.rotate_right(k);
            for (x, y) in a.w1.iter().zip(&restored) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }

        #[test]
        fn rule_is_monotone_in_outcomes(
            y1 in prop::collection::vec(any::<bool>(), 5),
            y0 in prop::collection::vec(any::<bool>(), 4),
            flip in 0usize..9,
            theta in 0.05f64..3.0,
        ) {
            let d = make_grid_design(5, 4, 0.1).unwrap();
            let w = weights(&d, &KernelSpec::GAUSSIAN, theta).unwrap();
            let base = decision_statistic(&w, &y1, &y0).unwrap();
            if flip < 5 {
                let mut y = y1.clone();
                y[flip] = true;
                prop_assert!(decision_statistic(&w, &y, &y0).unwrap() >= base);
            } else {
                let mut y = y0.clone();
                y[flip - 5] = true;
                prop_assert!(decision_statistic(&w, &y1, &y).unwrap() <= base);
            }
        }
    }
}
