use criterion::{criterion_group, criterion_main, Criterion};
use kirchhoff_bench::model;
use kirchhoff_core::{eigen, Canonical};
use std::hint::black_box;

fn principal(c: &mut Criterion) {
    let mut group = c.benchmark_group("lambda1_omega");
    group.sample_size(10);
    for which in [Canonical::BallP5, Canonical::CubeP5] {
        let m = model(which);
        group.bench_function(which.name(), |b| {
            b.iter(|| eigen::lambda1_omega(black_box(&m)).unwrap())
        });
    }
    group.finish();
}

fn at_mu(c: &mut Criterion) {
    let m = model(Canonical::BallP5);
    let mut group = c.benchmark_group("lambda1_mu");
    group.sample_size(10);
    group.bench_function("TP-BALL-P5", |b| {
        b.iter(|| eigen::lambda1_mu(black_box(&m), 1000.0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, principal, at_mu);
criterion_main!(benches);
