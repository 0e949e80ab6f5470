use regret_bw::bandwidth::table_theta_grid;
use regret_bw::*;

const K: KernelSpec = KernelSpec::GAUSSIAN;

#[test]
fn monte_carlo_max_regret_tracks_exact() {
    for (c, theta) in [(0.1, 0.3), (0.5, 1.0), (2.0, 0.5)] {
        let d = make_grid_design(2, 3, c).unwrap();
        let draws = make_draws(21, 50_000, &d).unwrap();
        let mc = max_regret(&d, &K, theta, &draws, PGridSpec::new(21)).unwrap();
        let exact = exact_max_regret_reduced(&d, &K, theta, 21).unwrap();
        let slack = 4.0 * 0.5 / (50_000f64).sqrt();
        assert!((mc.value - exact.value).abs() <= slack, "c = {c}: {} vs {}", mc.value, exact.value);
    }
}

#[test]
fn estimate_is_exact_regret_of_its_argmax_up_to_noise() {
    let d = make_grid_design(3, 3, 0.3).unwrap();
    let draws = make_draws(4, 100_000, &d).unwrap();
    let est = max_regret(&d, &K, 0.4, &draws, PGridSpec::new(41)).unwrap();
    let (p1, p0) = (est.argmax_point.p1, est.argmax_point.p0);
    let prof = worst_case_profiles(&d, p1, p0).unwrap();
    let (q1, q0) = if p1 > p0 { prof.minus_config() } else { prof.plus_config() };
    let exact = exact_regret_at(&d, &K, 0.4, q1, q0).unwrap();
    assert!((est.value - exact).abs() <= 4.0 * est.mc_standard_error + 1e-12);
}

#[test]
fn shared_draws_match_seeded_search() {
    let d = make_grid_design(6, 6, 0.2).unwrap();
    let cfg = BinarySearchConfig { seed: 9, s_draws: 3_000, ..Default::default() };
    let grid = ThetaGridSpec::log(0.05, 1.5, 15);
    let a = optimize_bandwidth(&d, &K, &cfg, &grid).unwrap();
    let draws = make_draws(9, 3_000, &d).unwrap();
    let b = optimize_bandwidth_with_draws(&d, &K, &draws, cfg.p_grid, &grid, &cfg.plateau).unwrap();
    assert_eq!(a, b);
}

#[test]
fn solution_invariants_hold_for_both_scopes() {
    let d = make_grid_design(8, 7, 0.15).unwrap();
    for scope in [CrnScope::Global, CrnScope::PerTheta] {
        let cfg = BinarySearchConfig {
            seed: 2,
            s_draws: 2_000,
            crn_scope: scope,
            plateau: PlateauRule::default_for(scope),
            ..Default::default()
        };
        let sol = optimize_bandwidth(&d, &K, &cfg, &ThetaGridSpec::default_for(&d).unwrap()).unwrap();
        assert_eq!(sol.method, SolutionMethod::BinaryMc);
        assert!(sol.plateau.0 <= sol.theta_star && sol.theta_star <= sol.plateau.1);
        assert!(sol.curve.iter().all(|p| p.regret >= sol.min_regret));
        let tol = cfg.plateau.abs_tol.max(cfg.plateau.z * sol.curve.iter().map(|p| p.se).fold(0.0, f64::max));
        for p in sol.curve.iter().filter(|p| p.theta >= sol.plateau.0 && p.theta <= sol.plateau.1) {
            assert!(p.regret <= sol.min_regret + tol);
        }
    }
}

#[test]
fn per_theta_scope_differs_from_global() {
    let d = make_grid_design(5, 5, 0.2).unwrap();
    let grid = ThetaGridSpec::log(0.1, 1.0, 6);
    let global = BinarySearchConfig { s_draws: 1_000, ..Default::default() };
    let per = BinarySearchConfig { crn_scope: CrnScope::PerTheta, ..global };
    let a = optimize_bandwidth(&d, &K, &global, &grid).unwrap();
    let b = optimize_bandwidth(&d, &K, &per, &grid).unwrap();
    assert_ne!(a.curve, b.curve);
}

#[test]
fn small_sample_row_flags_divergence() {
    let d = make_grid_design(5, 5, 0.1).unwrap();
    let cfg = BinarySearchConfig { seed: 3, s_draws: 20_000, ..Default::default() };
    let row = compare_binary_normal(&d, &K, &cfg, &table_theta_grid(), 0.5).unwrap();
    assert!((row.normal_theta_star - 0.64).abs() < 0.01);
    assert!(row.binary_plateau.1 < 0.6);
    assert!(row.divergent);
}

#[test]
fn large_sample_row_agrees() {
    let d = make_grid_design(100, 100, 0.2).unwrap();
    let cfg = BinarySearchConfig { seed: 3, s_draws: 20_000, ..Default::default() };
    let row = compare_binary_normal(&d, &K, &cfg, &table_theta_grid(), 0.5).unwrap();
    assert!((row.binary_theta_star - 0.13).abs() < 0.03, "{row:?}");
    assert!((row.normal_theta_star - 0.13).abs() < 0.01, "{row:?}");
    assert!(!row.divergent);
}

#[test]
fn table_rows_follow_input_order() {
    let cfg = BinarySearchConfig { s_draws: 300, p_grid: PGridSpec::new(11), ..Default::default() };
    let rows = reference_table(&[0.3, 0.1], &[10, 4], &K, &cfg, &ThetaGridSpec::log(0.1, 1.0, 5), 0.5).unwrap();
    let keys: Vec<(f64, usize)> = rows.iter().map(|r| (r.lipschitz_c, r.n1 + r.n0)).collect();
    assert_eq!(keys, vec![(0.3, 10), (0.3, 4), (0.1, 10), (0.1, 4)]);
}

#[test]
fn binary_and_normal_regret_close_at_moderate_n() {
    // sigma = 0.5 is the largest Bernoulli standard deviation
    let d = make_grid_design(25, 25, 0.1).unwrap();
    let cfg = BinarySearchConfig { s_draws: 20_000, ..Default::default() };
    let grid = ThetaGridSpec::log(0.2, 0.5, 6);
    let binary = optimize_bandwidth(&d, &K, &cfg, &grid).unwrap();
    let normal = normal_optimal_bandwidth(&NormalModelSpec::new(d, K, 0.5).unwrap(), &grid).unwrap();
    assert!((binary.min_regret - normal.min_regret).abs() < 0.01);
}
