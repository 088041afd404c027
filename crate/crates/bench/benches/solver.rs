use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use stein_gamma::stein::{suite, two_sided_grid, uniform_constant};
use stein_gamma::{GammaNu, QuadratureSpec, SteinEvaluator};

fn evaluate(c: &mut Criterion) {
    let law = GammaNu::new(1.0).unwrap();
    let ev = SteinEvaluator::new(law, suite::damped_tanh(), QuadratureSpec::default());
    let grid = two_sided_grid(1.0, 50, 50.0);
    c.bench_function("stein_residual_100_points", |b| {
        b.iter(|| ev.stein_residual(black_box(&grid), &[0.5]).unwrap())
    });
    c.bench_function("evaluate_fh_fresh_y", |b| {
        let mut y = 0.0;
        b.iter(|| {
            y += 1e-3;
            ev.evaluate_fh(black_box(0.7), &[y]).unwrap()
        })
    });
}

fn constants(c: &mut Criterion) {
    let mut group = c.benchmark_group("uniform_constant");
    group.sample_size(10);
    for nu in [0.5, 2.0] {
        let law = GammaNu::new(nu).unwrap();
        group.bench_function(format!("nu_{nu}"), |b| b.iter(|| uniform_constant(black_box(law))));
    }
    group.finish();
}

criterion_group!(benches, evaluate, constants);
criterion_main!(benches);
