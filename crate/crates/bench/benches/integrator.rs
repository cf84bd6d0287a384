//! Benchmarks for the hot paths: Lagrangian evaluation, slot gradients,
//! a full Newton step, and the pairing quadrature.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::dvector;

use pvi_core::lagrangian::Order;
use pvi_core::stepper::{step, SolverConfig};
use pvi_core::systems::{make_builtin, BuiltinName};
use pvi_core::{DiscreteLagrangian, QuadratureRule};

fn fieldline_l1(tau: f64) -> DiscreteLagrangian {
    let sys = Arc::new(make_builtin(BuiltinName::Fieldline, 0.0075).unwrap());
    DiscreteLagrangian::new(sys, Order::L1, tau, QuadratureRule::gauss_legendre(8)).unwrap()
}

fn bench_evaluate(c: &mut Criterion) {
    let dl = fieldline_l1(1.0);
    let z1 = dvector![1.2, 0.0];
    let z2 = dl.sys.flow(&z1, 1.0, 0.0);
    c.bench_function("fieldline_l1_evaluate", |b| {
        b.iter(|| std::hint::black_box(dl.evaluate(&z1, &z2, 0.0).unwrap()))
    });
}

fn bench_gradients(c: &mut Criterion) {
    let dl = fieldline_l1(1.0);
    let z1 = dvector![1.2, 0.0];
    let z2 = dl.sys.flow(&z1, 1.0, 0.0);
    c.bench_function("fieldline_l1_partial_gradients", |b| {
        b.iter(|| std::hint::black_box(dl.partial_gradients(&z1, &z2, 0.0).unwrap()))
    });
}

fn bench_step(c: &mut Criterion) {
    let dl = fieldline_l1(1.0);
    let cfg = SolverConfig::default();
    let z0 = dvector![1.2, 0.0];
    let z1 = dl.sys.flow(&z0, 1.0, 0.0);
    c.bench_function("fieldline_l1_newton_step", |b| {
        b.iter(|| std::hint::black_box(step(&dl, &cfg, &z0, &z1, 0.0).unwrap()))
    });
}

fn bench_pairing(c: &mut Criterion) {
    let sys = make_builtin(BuiltinName::Fieldline, 0.0075).unwrap();
    let quad = QuadratureRule::gauss_legendre(8);
    let z1 = dvector![1.2, 0.0];
    let z2 = dvector![0.3, 1.1];
    c.bench_function("fieldline_pairing_quadrature", |b| {
        b.iter(|| std::hint::black_box(sys.pairing_quadrature(&z1, &z2, &quad)))
    });
}

criterion_group!(benches, bench_evaluate, bench_gradients, bench_step, bench_pairing);
criterion_main!(benches);
