use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fracback_bench::{paper_1d, paper_2d, sine_pair};
use fracback_core::inversion::{
    backward_tikhonov, backward_tikhonov_filter, build_forward_map, Provenance,
    RegularizationChoice,
};
use fracback_core::l1fdm::{L1Solver, TimeGrid};
use fracback_core::linalg::EigenMethod;
use fracback_core::mlf::{ml_eval, MlfParams};
use fracback_core::neural::{
    backprop_batch, forward_pass, NetworkConfig, NetworkParams, TrainingSample,
};
use fracback_core::spectral::EigenSystem;

fn mlf(c: &mut Criterion) {
    let mut g = c.benchmark_group("mlf");
    let p = MlfParams::standard(0.2).unwrap();
    // one argument per regime: series, quadrature, asymptotic
    for x in [1.0, 20.0, 1e4] {
        g.bench_with_input(BenchmarkId::new("alpha0.2", x), &x, |b, &x| {
            b.iter(|| ml_eval(p, black_box(x)).unwrap())
        });
    }
    g.finish();
}

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigen");
    g.sample_size(10);
    let s1 = paper_1d(150);
    g.bench_function("jacobi_1d_n300", |b| {
        b.iter(|| EigenSystem::with_method(s1.operator.clone(), EigenMethod::Jacobi).unwrap())
    });
    let s2 = paper_2d(20);
    g.bench_function("faer_2d_n800", |b| {
        b.iter(|| EigenSystem::with_method(s2.operator.clone(), EigenMethod::Tridiagonal).unwrap())
    });
    g.finish();
}

fn l1(c: &mut Criterion) {
    let mut g = c.benchmark_group("l1");
    g.sample_size(10);
    let s = paper_1d(150);
    let u0 = sine_pair(s.grid, 5.0, 3.0);
    for steps in [256usize, 2048] {
        let solver = L1Solver::new(&s.operator, s.alpha, TimeGrid::new(1.0, steps).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("paper_1d", steps), &steps, |b, _| {
            b.iter(|| solver.solve_batch(std::slice::from_ref(&u0)).unwrap())
        });
    }
    let s2 = paper_2d(32);
    let solver = L1Solver::new(&s2.operator, s2.alpha, TimeGrid::new(1.0, 64).unwrap()).unwrap();
    let batch: Vec<_> = (1..=5).map(|m| sine_pair(s2.grid, m as f64, 1.0)).collect();
    g.bench_function("paper_2d_32x32_64steps_batch5", |b| {
        b.iter(|| solver.solve_batch(&batch).unwrap())
    });
    g.finish();
}

fn tikhonov(c: &mut Criterion) {
    let mut g = c.benchmark_group("tikhonov");
    g.sample_size(10);
    let s = paper_1d(150);
    let es = EigenSystem::new(s.operator.clone()).unwrap();
    let fm = build_forward_map(&es, s.alpha, s.t_final, Provenance::Spectral).unwrap();
    let u1 = fm.apply(&sine_pair(s.grid, 5.0, 3.0)).unwrap();
    let reg = RegularizationChoice::discrepancy(1e-3);
    g.bench_function("dense_discrepancy_n300", |b| {
        b.iter(|| backward_tikhonov(&fm, &u1, reg).unwrap())
    });
    g.bench_function("filter_discrepancy_n300", |b| {
        b.iter(|| backward_tikhonov_filter(&es, s.alpha, s.t_final, &u1, reg).unwrap())
    });
    g.finish();
}

fn network(c: &mut Criterion) {
    let mut g = c.benchmark_group("network");
    let s = paper_1d(150);
    let cfg = NetworkConfig::for_grid(2, &s.grid, 0).unwrap();
    let p = NetworkParams::init(&cfg);
    let x = sine_pair(s.grid, 5.0, 3.0);
    g.bench_function("forward_1d", |b| b.iter(|| forward_pass(&cfg, &p, &x).unwrap()));
    let samples: Vec<_> = (1..=5)
        .map(|m| TrainingSample::new(sine_pair(s.grid, m as f64, 2.0), sine_pair(s.grid, m as f64, 1.0)).unwrap())
        .collect();
    let refs: Vec<_> = samples.iter().collect();
    g.bench_function("backprop_1d_batch5", |b| {
        b.iter(|| backprop_batch(&cfg, &p, &refs).unwrap())
    });
    g.finish();
}

criterion_group!(benches, mlf, eigen, l1, tikhonov, network);
criterion_main!(benches);
