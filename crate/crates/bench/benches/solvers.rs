use criterion::{criterion_group, criterion_main, Criterion};
use kirchhoff_bench::pos_pair_model;
use kirchhoff_core::solvers;
use std::hint::black_box;

fn newton_and_census(c: &mut Criterion) {
    let m = pos_pair_model();
    let s = solvers::exterior_min(&m, 0.05).unwrap();
    // Start Newton from a perturbed solution so it has work to do.
    let start = s.field.scaled(1.05);
    let mut group = c.benchmark_group("TP-BALL-P3-POS");
    group.sample_size(10);
    group.bench_function("newton_refine", |b| {
        b.iter(|| solvers::newton_refine(&m, black_box(&start)).unwrap())
    });
    group.bench_function("exterior_min", |b| {
        b.iter(|| solvers::exterior_min(black_box(&m), 0.05).unwrap())
    });
    group.bench_function("census", |b| {
        b.iter(|| solvers::multiplicity_census(black_box(&m), m.lambda()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, newton_and_census);
criterion_main!(benches);
