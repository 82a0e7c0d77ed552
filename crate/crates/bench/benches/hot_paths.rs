//! Hot-path micro-benchmarks: per-step exponential, relative logarithm,
//! homogeneous norm, driver generation, and a full killed-walk step.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use dudley_bench::sample_algebra;
use dudley_core::diffusion::{DiffusionConfig, Scheme, Walker};
use dudley_core::driver::{sample_path, DriverConfig, StepGen};
use dudley_core::graded::{hnorm, relative_coords};
use dudley_core::lorentz::{exp_algebra, exp_first_layer_drift, log_group, GroupElement};

fn bench_exp(c: &mut Criterion) {
    let mut g = c.benchmark_group("exp");
    for d in [2usize, 3, 6] {
        let a = sample_algebra(d, 42, 0.4);
        g.bench_function(format!("generic_d{d}"), |b| {
            b.iter(|| black_box(exp_algebra(black_box(&a))))
        });
        let bvec: Vec<f64> = (1..=d).map(|i| a.first(i)).collect();
        g.bench_function(format!("boost_drift_d{d}"), |b| {
            b.iter(|| black_box(exp_first_layer_drift(d, black_box(&bvec), 1e-3)))
        });
    }
    g.finish();
}

fn bench_log(c: &mut Criterion) {
    let mut g = c.benchmark_group("log");
    for d in [2usize, 3, 6] {
        let a = sample_algebra(d, 7, 0.4);
        let el = exp_algebra(&a);
        g.bench_function(format!("log_group_d{d}"), |b| {
            b.iter(|| black_box(log_group(black_box(&el)).unwrap()))
        });
    }
    g.finish();
}

fn bench_hnorm_and_relative(c: &mut Criterion) {
    let a = sample_algebra(2, 11, 0.4);
    c.bench_function("hnorm_d2", |b| b.iter(|| black_box(hnorm(black_box(&a)))));
    let x = exp_algebra(&sample_algebra(2, 12, 0.3));
    let y = exp_algebra(&sample_algebra(2, 13, 0.3));
    c.bench_function("relative_coords_d2", |b| {
        b.iter(|| black_box(relative_coords(black_box(&x), black_box(&y)).unwrap()))
    });
}

fn bench_driver(c: &mut Criterion) {
    c.bench_function("driver_1k_steps_substep8_d2", |b| {
        b.iter(|| {
            black_box(
                sample_path(&DriverConfig {
                    seed: 3,
                    horizon: 1.0,
                    step: 1e-3,
                    m: 2,
                    substep: 8,
                })
                .unwrap(),
            )
        })
    });
}

fn bench_killed_walk(c: &mut Criterion) {
    let cfg = DiffusionConfig {
        d: 2,
        sigma: 1.0,
        step: 1e-3,
        horizon: 1.0,
        radius: Some(0.8),
        scheme: Scheme::ExponentialEuler,
    };
    c.bench_function("killed_walk_step_with_log_d2", |b| {
        b.iter_batched(
            || (StepGen::new(5, 2, 1), Walker::new(&cfg)),
            |(mut gen, mut w)| {
                for _ in 0..64 {
                    let rec = gen.next_step(1e-3);
                    let coords = w.step(&rec, true).unwrap().unwrap();
                    if hnorm(&coords) >= 0.8 {
                        w.set_rel(&GroupElement::identity(2));
                    }
                }
                black_box(w.t)
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_exp,
    bench_log,
    bench_hnorm_and_relative,
    bench_driver,
    bench_killed_walk
);
criterion_main!(benches);
