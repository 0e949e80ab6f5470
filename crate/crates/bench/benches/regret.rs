use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use regret_bw::mc::max_regret_naive;
use regret_bw::{
    exact_max_regret_reduced, make_grid_design, max_regret, normal_max_regret, optimize_bandwidth, BinarySearchConfig,
    KernelSpec, NormalModelSpec, PGridSpec, ThetaGridSpec,
};
use regret_bw_bench::fixture;

const K: KernelSpec = KernelSpec::GAUSSIAN;

fn inner_max(c: &mut Criterion) {
    let mut group = c.benchmark_group("max_regret");
    group.sample_size(10);
    for n in [10, 50] {
        let (design, draws) = fixture(n, 0.1, 500);
        group.bench_with_input(BenchmarkId::new("breakpoint", n), &n, |b, _| {
            b.iter(|| max_regret(&design, &K, 0.3, &draws, PGridSpec::new(101)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("naive", n), &n, |b, _| {
            b.iter(|| max_regret_naive(&design, &K, 0.3, &draws, PGridSpec::new(101)).unwrap())
        });
    }
    group.finish();
}

fn outer_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimize_bandwidth");
    group.sample_size(10);
    let design = make_grid_design(50, 50, 0.1).unwrap();
    let cfg = BinarySearchConfig { s_draws: 5_000, ..Default::default() };
    let grid = ThetaGridSpec::log(0.05, 2.0, 20);
    group.bench_function("n100_s5000_g20", |b| b.iter(|| optimize_bandwidth(&design, &K, &cfg, &grid).unwrap()));
    group.finish();
}

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_reduced");
    group.sample_size(10);
    for n in [4, 8, 12] {
        let design = make_grid_design(n / 2, n / 2, 0.3).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| exact_max_regret_reduced(&design, &K, 0.5, 41).unwrap())
        });
    }
    group.finish();
}

fn normal(c: &mut Criterion) {
    let spec = NormalModelSpec::new(make_grid_design(100, 100, 0.2).unwrap(), K, 0.5).unwrap();
    c.bench_function("normal_max_regret_n200", |b| b.iter(|| normal_max_regret(&spec, 0.13).unwrap()));
}

criterion_group!(benches, inner_max, outer_search, exact, normal);
criterion_main!(benches);
