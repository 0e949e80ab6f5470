//! Experimental designs and the Lipschitz parameter space.
//!
//! Covariates are stored already translated so that the target point is the
//! origin. Probability vectors over an arm have length `n + 1`: index 0 is the
//! success probability at the target point, index `i >= 1` the probability at
//! the `i`-th covariate of that arm.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack absorbed by every pairwise Lipschitz comparison.
pub const LIPSCHITZ_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Treated,
    Control,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::Treated => f.write_str("treated"),
            Arm::Control => f.write_str("control"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    x1: Vec<Vec<f64>>,
    x0: Vec<Vec<f64>>,
    lipschitz_c: f64,
}

impl ExperimentDesign {
    pub fn new(x1: Vec<Vec<f64>>, x0: Vec<Vec<f64>>, lipschitz_c: f64) -> Result<Self> {
        if x1.is_empty() || x0.is_empty() {
            return Err(Error::InvalidDesign(format!(
                "each arm needs at least one unit (n1 = {}, n0 = {})",
                x1.len(),
                x0.len()
            )));
        }
        let dim = x1[0].len();
        if dim == 0 {
            return Err(Error::InvalidDesign("covariate dimension must be at least 1".into()));
        }
        for x in x1.iter().chain(x0.iter()) {
            if x.len() != dim {
                return Err(Error::Dimension { what: "covariate vector", expected: dim, got: x.len() });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDesign("covariates must be finite".into()));
            }
        }
        if !(lipschitz_c.is_finite() && lipschitz_c >= 0.0) {
            return Err(Error::InvalidDesign(format!(
                "Lipschitz constant must be finite and nonnegative, got {lipschitz_c}"
            )));
        }
        Ok(ExperimentDesign { x1, x0, lipschitz_c })
    }

    /// One-dimensional convenience constructor.
    pub fn from_scalars(x1: &[f64], x0: &[f64], lipschitz_c: f64) -> Result<Self> {
        Self::new(x1.iter().map(|&v| vec![v]).collect(), x0.iter().map(|&v| vec![v]).collect(), lipschitz_c)
    }

    pub fn n1(&self) -> usize {
        self.x1.len()
    }

    pub fn n0(&self) -> usize {
        self.x0.len()
    }

    pub fn dim(&self) -> usize {
        self.x1[0].len()
    }

    pub fn lipschitz_c(&self) -> f64 {
        self.lipschitz_c
    }

    pub fn with_lipschitz_c(&self, lipschitz_c: f64) -> Result<Self> {
        Self::new(self.x1.clone(), self.x0.clone(), lipschitz_c)
    }

    pub fn covariates(&self, arm: Arm) -> &[Vec<f64>] {
        match arm {
            Arm::Treated => &self.x1,
            Arm::Control => &self.x0,
        }
    }

    pub fn len(&self, arm: Arm) -> usize {
        self.covariates(arm).len()
    }

    /// Euclidean distances from each covariate of `arm` to the target point.
    pub fn norms(&self, arm: Arm) -> Vec<f64> {
        self.covariates(arm).iter().map(|x| norm(x)).collect()
    }

    /// `C * ||X_i||` for each covariate of `arm`: how far the site probability
    /// may move away from the target-point probability.
    pub fn radii(&self, arm: Arm) -> Vec<f64> {
        self.covariates(arm).iter().map(|x| self.lipschitz_c * norm(x)).collect()
    }

    /// Points of `arm` including the target at index 0.
    fn points_with_target(&self, arm: Arm) -> Vec<Vec<f64>> {
        let mut pts = Vec::with_capacity(self.len(arm) + 1);
        pts.push(vec![0.0; self.dim()]);
        pts.extend(self.covariates(arm).iter().cloned());
        pts
    }

    /// Smallest nonzero distance of any covariate to the target point.
    pub fn min_nonzero_norm(&self) -> Option<f64> {
        self.norms(Arm::Treated).into_iter().chain(self.norms(Arm::Control)).filter(|&d| d > 0.0).min_by(f64::total_cmp)
    }

    /// Largest pairwise distance between covariates, pooled over both arms.
    pub fn diameter(&self) -> f64 {
        let all: Vec<&Vec<f64>> = self.x1.iter().chain(self.x0.iter()).collect();
        let mut best = 0.0f64;
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                best = best.max(distance(a, b));
            }
        }
        best
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Equidistant grid on `[-1, 1]` for both arms.
pub fn make_grid_design(n1: usize, n0: usize, lipschitz_c: f64) -> Result<ExperimentDesign> {
    if n1 < 2 || n0 < 2 {
        return Err(Error::InvalidDesign(format!(
            "grid design needs at least two points per arm (n1 = {n1}, n0 = {n0})"
        )));
    }
    ExperimentDesign::from_scalars(&grid_points(n1), &grid_points(n0), lipschitz_c)
}

fn grid_points(n: usize) -> Vec<f64> {
    let denom = (n - 1) as f64;
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / denom).collect()
}

/// Lower clipped profile entry: `max(p - r, 0)`.
#[inline]
pub(crate) fn clip_lower(p: f64, radius: f64) -> f64 {
    (p - radius).max(0.0)
}

/// Upper clipped profile entry: `min(p + r, 1)`.
#[inline]
pub(crate) fn clip_upper(p: f64, radius: f64) -> f64 {
    (p + radius).min(1.0)
}

pub(crate) fn lower_profile(p: f64, radii: &[f64]) -> Vec<f64> {
    std::iter::once(p).chain(radii.iter().map(|&r| clip_lower(p, r))).collect()
}

pub(crate) fn upper_profile(p: f64, radii: &[f64]) -> Vec<f64> {
    std::iter::once(p).chain(radii.iter().map(|&r| clip_upper(p, r))).collect()
}

/// Worst-case probability profiles anchored at the target-point
/// probabilities of each arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseProfiles {
    pub p1_lo: Vec<f64>,
    pub p1_hi: Vec<f64>,
    pub p0_lo: Vec<f64>,
    pub p0_hi: Vec<f64>,
}

impl WorstCaseProfiles {
    /// Configuration that maximizes regret when treatment is better:
    /// treated pushed down, control pushed up.
    pub fn minus_config(&self) -> (&[f64], &[f64]) {
        (&self.p1_lo, &self.p0_hi)
    }

    /// Configuration that maximizes regret when control is better.
    pub fn plus_config(&self) -> (&[f64], &[f64]) {
        (&self.p1_hi, &self.p0_lo)
    }
}

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

pub fn worst_case_profiles(design: &ExperimentDesign, p1: f64, p0: f64) -> Result<WorstCaseProfiles> {
    check_unit("treated anchor probability", p1)?;
    check_unit("control anchor probability", p0)?;
    let r1 = design.radii(Arm::Treated);
    let r0 = design.radii(Arm::Control);
    Ok(WorstCaseProfiles {
        p1_lo: lower_profile(p1, &r1),
        p1_hi: upper_profile(p1, &r1),
        p0_lo: lower_profile(p0, &r0),
        p0_hi: upper_profile(p0, &r0),
    })
}

/// Whether `(p1_vec, p0_vec)` lies in the Lipschitz parameter space of the
/// design. Index 0 of each vector refers to the target point.
pub fn membership_check(design: &ExperimentDesign, p1_vec: &[f64], p0_vec: &[f64]) -> Result<bool> {
    for (arm, vec) in [(Arm::Treated, p1_vec), (Arm::Control, p0_vec)] {
        let expected = design.len(arm) + 1;
        if vec.len() != expected {
            return Err(Error::Dimension { what: "probability vector", expected, got: vec.len() });
        }
    }
    Ok(arm_in_space(design, Arm::Treated, p1_vec) && arm_in_space(design, Arm::Control, p0_vec))
}

fn arm_in_space(design: &ExperimentDesign, arm: Arm, p: &[f64]) -> bool {
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return false;
    }
    let pts = design.points_with_target(arm);
    let c = design.lipschitz_c();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if (p[i] - p[j]).abs() > c * distance(&pts[i], &pts[j]) + LIPSCHITZ_TOLERANCE {
                return false;
            }
        }
    }
    true
}
