//! Minimax-regret bandwidth selection for kernel plug-in treatment rules.
//!
//! A planner observes binary outcomes from a treated and a control arm at
//! fixed covariate values and decides whether to treat at the origin by the
//! sign of a kernel-regression contrast. This crate computes the worst-case
//! (maximum) regret of that rule as a function of the bandwidth and picks the
//! bandwidth minimizing it.
//!
//! Modules:
//!
//! - [`design`]: experimental designs, the Lipschitz parameter space and the
//!   clipped worst-case probability profiles.
//! - [`kernel`]: nonnegative kernels, normalized weights and the decision rule.
//! - [`mc`]: common-random-number Monte Carlo estimate of the maximum regret.
//! - [`exact`]: exact enumeration engine for small designs, including a
//!   brute-force search over the whole parameter space.
//! - [`normal`]: closed-form maximum regret for Gaussian outcomes.
//! - [`bandwidth`]: outer minimization over the bandwidth and plateau detection.

pub mod bandwidth;
pub mod design;
pub mod error;
pub mod exact;
pub mod kernel;
pub mod mc;
pub mod normal;

pub use bandwidth::{
    compare_binary_normal, optimize_bandwidth, optimize_bandwidth_with_draws, plateau_detect, reference_table,
    BandwidthSolution, BinarySearchConfig, ComparisonRow, CrnScope, CurvePoint, PlateauRule, SolutionMethod, Spacing,
    ThetaGridSpec,
};
pub use design::{make_grid_design, membership_check, worst_case_profiles, Arm, ExperimentDesign, WorstCaseProfiles};
pub use error::{Error, ErrorKind, Result};
pub use exact::{
    exact_acceptance, exact_max_regret_bruteforce, exact_max_regret_reduced, exact_regret_at, ExactMethod,
    ExactRegretResult,
};
pub use kernel::{decision_statistic, weights, KernelFamily, KernelSpec, RuleWeights, WeightVectors};
pub use mc::{
    acceptance_minus, acceptance_plus, make_draws, max_regret, Branch, CrnDraws, MaxRegretEstimate, PGridSpec,
    RegretSurfacePoint,
};
pub use normal::{
    eta, normal_max_regret, normal_max_regret_direct, normal_optimal_bandwidth, NormalModelSpec, NormalRegretBreakdown,
};
