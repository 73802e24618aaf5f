use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cellot::fgw::{build_instance, fgw_solve};
use cellot::kernels::{gram, median_heuristic, pairwise_distance, truncate_and_features};
use cellot::transport::{cost_matrix, sample, sinkhorn, w2_closed_form, wp_empirical, SinkhornOptions};
use cellot::{DistanceSpec, ExponentConvention, FgwOptions, Solver};
use cellot_bench::{complexes, signal_pair};

fn closed_form(c: &mut Criterion) {
    let mut group = c.benchmark_group("w2_closed_form");
    for n in [8, 32, 128] {
        let (a, b) = signal_pair(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| w2_closed_form(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn empirical(c: &mut Criterion) {
    let mut group = c.benchmark_group("wp_empirical");
    group.sample_size(10);
    let (a, b) = signal_pair(8, 2);
    for n in [100, 500, 2000] {
        group.bench_with_input(BenchmarkId::new("exact", n), &n, |bench, &n| {
            bench.iter(|| wp_empirical(&a, &b, 2.0, n, 0, &Solver::Exact).unwrap())
        });
    }
    let mu = sample(&a, 500, 3).unwrap();
    let nu = sample(&b, 500, 4).unwrap();
    let cost = cost_matrix(&mu, &nu, 2.0).unwrap();
    let opts = SinkhornOptions { epsilon: 0.1 * cost.mean(), max_iters: 5_000, tol: 1e-6 };
    group.bench_function("sinkhorn/500", |bench| bench.iter(|| sinkhorn(&mu, &nu, 2.0, &opts).unwrap()));
    group.finish();
}

fn fgw(c: &mut Criterion) {
    let mut group = c.benchmark_group("fgw_solve");
    for n in [8, 32, 64] {
        let items = complexes(2, n, 3);
        let inst = build_instance(&items[0], &items[1], 0, 0.5, 2.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| fgw_solve(black_box(&inst), &FgwOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("gram");
    group.sample_size(10);
    let items = complexes(30, 8, 4);
    let spec = DistanceSpec::fgw(0.5, 2.0, 0);
    group.bench_function("fgw_pairwise/30", |bench| bench.iter(|| pairwise_distance(&items, &spec, None).unwrap()));
    let d = pairwise_distance(&items, &spec, None).unwrap();
    let k = gram(&d, median_heuristic(&d), ExponentConvention::Squared).unwrap();
    group.bench_function("truncate/30", |bench| bench.iter(|| truncate_and_features(black_box(&k), None).unwrap()));
    group.finish();
}

criterion_group!(benches, closed_form, empirical, fgw, kernel);
criterion_main!(benches);
