//! Randomized invariants across the public API.

use std::sync::Arc;

use fracback_core::domain::{
    assemble_strong, assemble_weak, CoupledOperator, Diffusion, Field, Grid, ScalarField,
    StrongCoefficients, WeakCoefficients,
};
use fracback_core::harness::{add_noise, NoiseScale};
use fracback_core::inversion::{
    backward_spectral, backward_tikhonov, backward_tikhonov_filter, build_forward_map, Provenance,
    RegularizationChoice,
};
use fracback_core::io::{read_field_csv, write_field_csv, ArrayFile};
use fracback_core::l1fdm::{solve_forward, L1Weights, TimeGrid};
use fracback_core::mlf::{ml_eval, quadrature, MlfParams};
use fracback_core::neural::{train, NetworkConfig, TrainOptions, TrainingSample};
use fracback_core::spectral::{propagate_homogeneous, EigenSystem};
use ndarray::{array, Array2};
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

fn field_from(grid: Grid, k: usize, vals: &[f64]) -> Field {
    let v = Array2::from_shape_fn((k, grid.points()), |(c, p)| vals[(c * 31 + p * 7) % vals.len()]);
    Field::new(grid, v).unwrap()
}

fn rel(a: &Field, b: &Field) -> f64 {
    let num = (a.values() - b.values()).mapv(|v| v * v).sum().sqrt();
    num / b.values().mapv(|v| v * v).sum().sqrt()
}

/// Two-component weak system with random diffusion and a PSD coupling.
fn weak_system(nx: usize, ny: Option<usize>, d: [f64; 2], slope: f64, a: f64, b: f64) -> CoupledOperator {
    let grid = match ny {
        Some(ny) => Grid::new_2d(nx, ny).unwrap(),
        None => Grid::new_1d(nx).unwrap(),
    };
    let coeffs = WeakCoefficients::new(
        vec![
            Diffusion::scalar(ScalarField::Constant(d[0])),
            Diffusion::scalar(ScalarField::OnePlusX { slope: slope * d[1] }),
        ],
        array![[a, -b], [-b, a]],
    )
    .unwrap();
    assemble_weak(&grid, &coeffs).unwrap()
}

fn arb_system() -> impl Strategy<Value = CoupledOperator> {
    (
        3usize..14,
        prop::option::of(3usize..6),
        0.5f64..3.0,
        0.5f64..3.0,
        0.0f64..2.0,
        0.0f64..2.0,
        0.0f64..1.0,
    )
        .prop_map(|(nx, ny, d0, d1, slope, a, frac)| {
            weak_system(nx.min(if ny.is_some() { 6 } else { 14 }), ny, [d0, d1], slope, a, a * frac)
        })
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn ml_positive_bounded_and_decreasing(alpha in 0.05f64..0.95, lx in -4.0f64..6.0, r in 1e-3f64..1.0) {
        let p = MlfParams::standard(alpha).unwrap();
        let x = 10f64.powf(lx);
        let (e, e2) = (ml_eval(p, x).unwrap(), ml_eval(p, x * (1.0 + r)).unwrap());
        prop_assert!(e > 0.0 && e <= 1.0);
        prop_assert!(e2 <= e);
        prop_assert!(x * e <= 1.0, "x E = {}", x * e);
    }

    #[test]
    fn ml_regimes_agree_near_cutoffs(alpha in 0.1f64..0.95, gap in 0.0f64..1.5, near in prop::bool::ANY, dx in -0.5f64..0.5) {
        let p = MlfParams::new(alpha, alpha + gap).unwrap();
        let x = if near { 5.0 + dx } else { 50.0 + 10.0 * dx };
        let (v, q) = (ml_eval(p, x).unwrap(), quadrature(p, x).unwrap());
        prop_assert!((v - q).abs() <= 1e-7 * q.abs().max(1e-300), "x={x}: {v} vs {q}");
    }
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn operators_symmetric_and_positive(op in arb_system(), v in values(64)) {
        prop_assert!(op.symmetry_defect() <= 1e-13);
        let f = field_from(*op.grid(), op.components(), &v);
        let q = f.flat().dot(&op.apply_flat(f.flat().view()));
        prop_assert!(q > 0.0 || f.max_abs() == 0.0);
    }

    #[test]
    fn strong_operator_symmetric_and_positive(nx in 3usize..7, ny in 3usize..7, mu in 0.2f64..2.0, lam in 0.0f64..2.0, v in values(64)) {
        let grid = Grid::new_2d(nx, ny).unwrap();
        let op = assemble_strong(&grid, &StrongCoefficients::isotropic_lame(mu, lam, array![[0.5, 0.0], [0.0, 0.5]])).unwrap();
        prop_assert!(op.symmetry_defect() <= 1e-13);
        let f = field_from(grid, 2, &v);
        prop_assert!(f.flat().dot(&op.apply_flat(f.flat().view())) > 0.0);
    }

    #[test]
    fn zero_coupling_is_block_diagonal(nx in 3usize..12, d0 in 0.5f64..3.0, d1 in 0.5f64..3.0) {
        let op = weak_system(nx, None, [d0, d1], 1.0, 0.0, 0.0);
        let grid = *op.grid();
        let single = |d: Diffusion| {
            assemble_weak(&grid, &WeakCoefficients::new(vec![d], array![[0.0]]).unwrap()).unwrap()
        };
        let a = single(Diffusion::scalar(ScalarField::Constant(d0)));
        let b = single(Diffusion::scalar(ScalarField::OnePlusX { slope: d1 }));
        let m = op.matrix();
        let n = grid.points();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(m[[i, j]], a.matrix()[[i, j]]);
                prop_assert_eq!(m[[n + i, n + j]], b.matrix()[[i, j]]);
                prop_assert_eq!(m[[i, n + j]], 0.0);
            }
        }
    }

    #[test]
    fn parseval_round_trip_and_decay(op in arb_system(), v in values(64), alpha in 0.1f64..0.9) {
        let es = EigenSystem::new(Arc::new(op)).unwrap();
        let f = field_from(*es.grid(), es.components(), &v);
        let c = es.coefficients(&f).unwrap();
        let n2: f64 = c.iter().map(|x| x * x).sum();
        prop_assert!((n2 - f.norm().powi(2)).abs() <= 1e-12 * n2.max(1e-300));
        let back = es.synthesize(c.view()).unwrap();
        prop_assert!((back.values() - f.values()).iter().all(|d| d.abs() <= 1e-12));
        let times = [1e-3, 0.1, 0.5, 1.0, 2.0];
        let mut prev = vec![1.0; es.len()];
        for t in times {
            let e = es.decay_factors(alpha, t).unwrap();
            for (p, x) in prev.iter_mut().zip(&e) {
                prop_assert!(*x <= *p && *x > 0.0);
                *p = *x;
            }
        }
    }

    #[test]
    fn backward_inverts_forward(op in arb_system(), v in values(64), alpha in 0.1f64..0.9, t in 0.2f64..2.0) {
        let es = EigenSystem::new(Arc::new(op)).unwrap();
        let u0 = field_from(*es.grid(), es.components(), &v);
        prop_assume!(u0.norm() > 1e-3);
        let u1 = propagate_homogeneous(&es, alpha, &u0, &[t]).unwrap().pop().unwrap();
        let back = backward_spectral(&es, alpha, t, &u1, None).unwrap();
        prop_assert!(rel(&back, &u0) < 1e-8);
    }

    #[test]
    fn tikhonov_monotone_and_matches_filter(op in arb_system(), v in values(64), w in values(16)) {
        let es = EigenSystem::new(Arc::new(op)).unwrap();
        let grid = *es.grid();
        let fm = build_forward_map(&es, 0.4, 1.0, Provenance::Spectral).unwrap();
        let u0 = field_from(grid, es.components(), &v);
        prop_assume!(u0.norm() > 1e-3);
        let clean = fm.apply(&u0).unwrap();
        let u1 = Field::new(grid, clean.values() + field_from(grid, es.components(), &w).values() * 1e-3).unwrap();
        let (mut res, mut norm) = (0.0f64, f64::INFINITY);
        for k in 0..9 {
            let eps = 10f64.powi(-8 + k);
            let reg = RegularizationChoice::Fixed { epsilon: eps };
            let d = backward_tikhonov(&fm, &u1, reg).unwrap();
            prop_assert!(d.residual >= res * (1.0 - 1e-9));
            prop_assert!(d.field.norm() <= norm * (1.0 + 1e-9));
            res = d.residual;
            norm = d.field.norm();
            if eps >= 1e-6 {
                let f = backward_tikhonov_filter(&es, 0.4, 1.0, &u1, reg).unwrap();
                prop_assert!(rel(&d.field, &f.field) <= 1e-10);
            }
        }
    }

    #[test]
    fn l1_solution_never_grows(op in arb_system(), v in values(64), alpha in 0.1f64..0.9, n in 4usize..40) {
        let u0 = field_from(*op.grid(), op.components(), &v);
        let traj = solve_forward(&op, alpha, &u0, None, TimeGrid::new(1.0, n).unwrap(), true)
            .unwrap()
            .trajectory
            .unwrap();
        for u in &traj {
            prop_assert!(u.norm() <= u0.norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn l1_weights_telescope(alpha in 0.05f64..0.95, n in 1usize..300) {
        let w = L1Weights::new(alpha, n).unwrap();
        let b = w.b();
        prop_assert_eq!(b[0], 1.0);
        prop_assert!(b.windows(2).all(|p| p[1] < p[0] && p[1] > 0.0));
    }

    #[test]
    fn noise_is_seeded(v in values(40), delta in 0.0f64..0.2, seed in 0u64..1000) {
        let grid = Grid::new_1d(20).unwrap();
        let f = field_from(grid, 2, &v);
        let a = add_noise(&f, delta, seed, NoiseScale::Relative).unwrap();
        let b = add_noise(&f, delta, seed, NoiseScale::Relative).unwrap();
        prop_assert_eq!(&a, &b);
        if delta == 0.0 {
            prop_assert_eq!(&a, &f);
        }
    }

    #[test]
    fn files_round_trip(v in values(60), ny in prop::option::of(3usize..6)) {
        let grid = match ny {
            Some(ny) => Grid::new_2d(4, ny).unwrap(),
            None => Grid::new_1d(15).unwrap(),
        };
        let f = field_from(grid, 2, &v);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_field_csv(&p, &f).unwrap();
        prop_assert_eq!(read_field_csv(&p).unwrap(), f.clone());
        let arr = ArrayFile::new(vec![2, grid.points()], grid.describe(), f.flat().to_vec()).unwrap();
        let q = dir.path().join("f.bin");
        arr.write(&q).unwrap();
        prop_assert_eq!(ArrayFile::read(&q).unwrap(), arr);
    }
}

proptest! {
    #![proptest_config(cases(6))]

    #[test]
    fn training_is_bitwise_reproducible(seed in 0u64..100, v in values(24)) {
        let grid = Grid::new_1d(12).unwrap();
        let data: Vec<TrainingSample> = (0..3)
            .map(|i| {
                let x = field_from(grid, 1, &v[i..]);
                let y = Field::new(grid, x.values() * 2.0).unwrap();
                TrainingSample::new(x, y).unwrap()
            })
            .collect();
        let cfg = NetworkConfig::for_grid(1, &grid, seed).unwrap();
        let opts = TrainOptions { epochs: 20, batch_size: 2, learning_rate: 1e-3, seed };
        let a = train(&cfg, &data, opts).unwrap();
        let b = train(&cfg, &data, opts).unwrap();
        prop_assert_eq!(a.history, b.history);
        prop_assert_eq!(a.params, b.params);
    }
}
