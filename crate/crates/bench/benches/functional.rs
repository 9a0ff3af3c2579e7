use criterion::{criterion_group, criterion_main, Criterion};
use kirchhoff_bench::{field, model};
use kirchhoff_core::{functional, Canonical};
use std::hint::black_box;

fn energy_and_gradient(c: &mut Criterion) {
    for which in [Canonical::BallP5, Canonical::CubeP5] {
        let m = model(which);
        let u = field(&m, 0);
        let mut group = c.benchmark_group(which.name());
        group.bench_function("energy", |b| b.iter(|| functional::energy(&m, black_box(&u)).unwrap()));
        group.bench_function("gradient", |b| {
            b.iter(|| functional::gradient_field(&m, black_box(&u)).unwrap())
        });
        group.bench_function("residual", |b| {
            b.iter(|| functional::residual_norm(&m, black_box(&u)).unwrap())
        });
        group.finish();
    }
}

criterion_group!(benches, energy_and_gradient);
criterion_main!(benches);
