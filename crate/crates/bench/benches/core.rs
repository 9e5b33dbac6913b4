use std::hint::black_box;

use chaosx_bench::chi_model;
use chaosx_core::constants::{pickands_finite, PickandsEstimator};
use chaosx_core::gauss::{simulate_fbm, GridSpec};
use chaosx_core::homog::{analyze_sphere, AnalysisOptions, HomogeneousSpec};
use chaosx_core::mc::{estimate_sup_prob, GridStep};
use chaosx_core::{asymptotic, ConstantsCache};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn fbm(c: &mut Criterion) {
    let mut g = c.benchmark_group("fbm_path");
    for n in [1_025usize, 16_385] {
        let grid = GridSpec::new(0.0, 1.0, n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &grid, |b, grid| b.iter(|| simulate_fbm(1.2, black_box(grid), 7).unwrap()));
    }
    g.finish();
}

fn sphere(c: &mut Criterion) {
    let mut g = c.benchmark_group("sphere_analysis");
    let specs = [
        ("chi_square_3", HomogeneousSpec::chi_square(3)),
        ("product_3", HomogeneousSpec::product(3).unwrap()),
        ("lrho_3_d3", HomogeneousSpec::lrho(3.0, 2.0, 3).unwrap()),
    ];
    for (name, spec) in &specs {
        g.bench_function(*name, |b| b.iter(|| analyze_sphere(black_box(spec), &AnalysisOptions::default()).unwrap()));
    }
    g.finish();
}

fn formulas(c: &mut Criterion) {
    let model = chi_model(1.0);
    let cache = ConstantsCache::default();
    c.bench_function("asymptotic_stationary_chi", |b| b.iter(|| asymptotic(&model, &cache, black_box(14.0)).unwrap()));
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    let model = chi_model(1.0);
    g.bench_function("sup_prob_chi_u8_n20000", |b| {
        b.iter(|| estimate_sup_prob(&model, black_box(8.0), GridStep::Auto, 20_000, 1).unwrap())
    });
    g.bench_function("pickands_alpha1_s16_n2000", |b| {
        b.iter(|| pickands_finite(1.0, 16.0, 0.05, 2_000, 3, PickandsEstimator::ShiftRatio).unwrap())
    });
    g.finish();
}

criterion_group!(benches, fbm, sphere, formulas, monte_carlo);
criterion_main!(benches);
