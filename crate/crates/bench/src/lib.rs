//! Fixtures shared by the benchmarks.

use regret_bw::{make_draws, make_grid_design, CrnDraws, ExperimentDesign};

/// Grid design with `n / 2` units per arm and draws for it.
pub fn fixture(n: usize, lipschitz_c: f64, s_draws: usize) -> (ExperimentDesign, CrnDraws) {
    let design = make_grid_design(n / 2, n / 2, lipschitz_c).expect("valid grid design");
    let draws = make_draws(7, s_draws, &design).expect("draws");
    (design, draws)
}
