use ngo_core::coeff::{complex_fn, constant, real_fn, source_fn};
use ngo_core::expm::{expm, expm_scaled, identity, matmul, matvec};
use ngo_core::hopping::{source_matrix, HoppingDirectSolver, HoppingProblem};
use ngo_core::scalar::ScalarSolver;
use ngo_core::system::{system_direct_reference_with, DirectSettings, Splitting, SystemSolver, Transport};
use ngo_core::{InitMode, PeriodicGrid, ScalarProblem64, SystemProblem64};
use num_complex::Complex;
use proptest::prelude::*;
use std::f64::consts::TAU;

type C = Complex<f64>;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expm_inverse_pair(a in prop::array::uniform3(prop::array::uniform3(-3.0..3.0f64))) {
        let neg = a.map(|r| r.map(|v| -v));
        let prod = matmul(&expm(&a), &expm(&neg));
        let id = identity::<f64, 3>();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((prod[i][j] - id[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hopping_source_invariants(
        b in (-2.0..2.0f64, -2.0..2.0f64),
        gap in 0.0..500.0f64,
        dt in 1e-3..0.1f64,
        v in prop::array::uniform4(-1.0..1.0f64),
    ) {
        let m = expm_scaled(&source_matrix(C::new(b.0, b.1), C::new(0.0, 0.0), gap), dt);
        let w = matvec(&m, &v);
        prop_assert!((w[0] + w[1] - v[0] - v[1]).abs() < 1e-12);
        let rot = expm_scaled(&source_matrix(C::new(0.0, 0.0), C::new(0.0, 0.0), gap), dt);
        let w = matvec(&rot, &v);
        prop_assert!((w[2].hypot(w[3]) - v[2].hypot(v[3])).abs() < 1e-12);
    }

    #[test]
    fn scalar_corrected_data_meets_constraint(eps in 1e-4..1.0f64, k in 1i32..4) {
        let xg = PeriodicGrid::new(0.0, TAU, 24).unwrap();
        let mut p = ScalarProblem64::new(xg, PeriodicGrid::tau(32).unwrap(), eps, xg.spacing() / 2.0, 0.05);
        p.c = real_fn(|x: f64| x.cos().powi(2));
        p.a = real_fn(move |x: f64| 1.5 + (k as f64 * x).cos());
        p.r = source_fn(|u: C| u * u / (u * u + 2.0 * u.norm_sqr() + 1e-300));
        p.alpha = complex_fn(|x: f64| C::new(1.0 + 0.5 * x.cos(), x.sin()));
        let solver = ScalarSolver::new(&p).unwrap();
        let u = solver.reconstruct(&solver.initial_state(InitMode::Corrected).unwrap());
        for (j, z) in u.iter().enumerate() {
            prop_assert!((z - p.initial_data(xg.node(j))).norm() < 1e-12);
        }
    }

    #[test]
    fn system_corrected_data_meets_constraint(eps in 1e-4..1.0f64, c12 in -2.0..2.0f64, c21 in -2.0..2.0f64) {
        let xg = PeriodicGrid::new(0.0, TAU, 16).unwrap();
        let mut p = SystemProblem64::new(xg, PeriodicGrid::tau(16).unwrap(), eps, xg.spacing() / 8.0, 0.1);
        p.a1 = constant(1.0);
        p.a2 = constant(4.0);
        p.big_e = real_fn(|x: f64| 1.5 + x.cos());
        p.cmat = [[0.0, c12], [c21, 0.0]];
        p.f1_in = complex_fn(|x: f64| C::new(x.cos(), 1.0));
        p.f2_in = complex_fn(|x: f64| C::new(1.0, x.sin()));
        let solver = SystemSolver::new(&p).unwrap();
        let (u1, u2) = solver.reconstruct(&solver.initial_state(InitMode::Corrected).unwrap());
        for j in 0..16 {
            let x = xg.node(j);
            prop_assert!((u1[j] - (p.f1_in)(x)).norm() < 1e-12);
            prop_assert!((u2[j] - (p.f2_in)(x)).norm() < 1e-12);
        }
    }

    #[test]
    fn system_direct_norm_with_skew_coupling(w in -3.0..3.0f64, eps in 1e-3..1.0f64) {
        let xg = PeriodicGrid::new(0.0, TAU, 32).unwrap();
        let mut p = SystemProblem64::new(xg, PeriodicGrid::tau(8).unwrap(), eps, 0.01, 0.05);
        p.a1 = constant(1.0);
        p.a2 = constant(-2.0);
        p.big_e = real_fn(|x: f64| 1.5 + x.cos());
        p.cmat = [[0.0, w], [-w, 0.0]];
        p.f1_in = complex_fn(|x: f64| C::new(1.0 + 0.5 * x.cos(), x.sin()));
        p.f2_in = complex_fn(|x: f64| C::new(x.sin(), 0.3));
        let settings = DirectSettings { grid: xg, dt: 0.01, transport: Transport::Spectral, splitting: Splitting::Lie };
        let mut norms = Vec::new();
        system_direct_reference_with(&p, 0.05, settings, |_, a, b| {
            norms.push(a.iter().chain(b).map(|z| z.norm_sqr()).sum::<f64>());
        }).unwrap();
        for pair in norms.windows(2) {
            prop_assert!((pair[1] - pair[0]).abs() <= 1e-12 * pair[0]);
        }
    }
}

#[test]
fn hopping_direct_mass_over_long_run() {
    let p = HoppingProblem::<f64>::avoided_crossing(0.25, 32, 32, 8, 0.05, 2.0).unwrap();
    let solver = HoppingDirectSolver::new(&p).unwrap();
    let mut masses = Vec::new();
    solver.run_with(ngo_core::hopping::hopping_initial_kinetic(&p), |s| masses.push(solver.mass(s))).unwrap();
    assert_eq!(masses.len(), 41);
    assert!(masses.iter().all(|m| (m - masses[0]).abs() < 1e-10));
}

#[test]
fn single_precision_scalar_pipeline() {
    let xg = ngo_core::PeriodicGrid32::new(0.0, std::f32::consts::TAU, 16).unwrap();
    let mut p = ngo_core::ScalarProblem32::new(xg, PeriodicGrid::tau(16).unwrap(), 0.01, 0.05, 0.2);
    p.a = real_fn(|x: f32| 1.5 + x.cos());
    let solver = ScalarSolver::new(&p).unwrap();
    let u = solver.reconstruct(&solver.run(InitMode::Corrected).unwrap());
    for (j, z) in u.iter().enumerate() {
        let x = xg.node(j);
        let expect = ngo_core::cis(ngo_core::fast_phase((1.5 + x.cos()) * 0.2, 0.01));
        assert!((z - expect).norm() < 1e-3, "{j}: {z} vs {expect}");
    }
}
