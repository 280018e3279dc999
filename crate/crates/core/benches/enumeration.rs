use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ising_core::lattice::{build_rectangle, Coord2, RectangleSpec};
use ising_core::observables::{
    partition_function_contour_with, two_point_observable_with, EnumOptions, SourceSpec, Stub,
};
use ising_core::par::Policy;
use ising_core::rps::build_rps_direct_with;
use ising_core::shol_core::IsingCoupling;

fn opts(policy: Policy) -> EnumOptions {
    EnumOptions { policy, ..EnumOptions::default() }
}

fn policies() -> [(&'static str, Policy); 2] {
    [("sequential", Policy::Sequential), ("parallel", Policy::Parallel)]
}

fn contour(c: &mut Criterion) {
    let k = IsingCoupling::critical();
    let d = build_rectangle(RectangleSpec::new(5, 5)).unwrap();
    let src = SourceSpec { edge: Coord2::new(3, 0), stub: Stub::Up };
    let mut g = c.benchmark_group("contour_5x5");
    g.sample_size(10);
    for (name, p) in policies() {
        g.bench_function(BenchmarkId::new("partition_function", name), |b| {
            b.iter(|| partition_function_contour_with(black_box(&d), &k, opts(p)).unwrap())
        });
        g.bench_function(BenchmarkId::new("two_point", name), |b| {
            b.iter(|| two_point_observable_with(black_box(&d), src, &k, opts(p)).unwrap())
        });
    }
    g.finish();
}

fn rps_columns(c: &mut Criterion) {
    let k = IsingCoupling::critical();
    let d = build_rectangle(RectangleSpec::new(9, 6)).unwrap();
    let b: Vec<Coord2> = (0..8).map(|j| Coord2::new(2 * j + 1, 0)).collect();
    let mut g = c.benchmark_group("rps_direct_9x6");
    g.sample_size(10);
    for (name, p) in policies() {
        g.bench_function(name, |bch| bch.iter(|| build_rps_direct_with(black_box(&d), &b, &k, p).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, contour, rps_columns);
criterion_main!(benches);
