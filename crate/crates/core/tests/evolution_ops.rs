use std::f64::consts::PI;

use ptqm_core::evolution::{
    detect_cyclic, evolve, evolve_on_grid, gauge_field, gauge_field_hermiticity, propagator_oscillator,
    EvolutionRecord, ParameterPath,
};
use ptqm_core::hilbert::{HamiltonianFamily, MetricFamily, PhysicalState};
use ptqm_core::linalg::{c, max_abs, max_abs_diff, sandwich, unitary_exp, wrap_phase, CMat, CVec, C64};
use ptqm_core::models::fock::{build_fock_ops, coherent_state, exp_raising};
use ptqm_core::models::oscillator::{signed_area, OscillatorModel};
use ptqm_core::models::two_level;
use ptqm_core::{PtqmError, Tolerances};

fn e(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = c(1.0, 0.0);
    v
}

fn model() -> OscillatorModel {
    OscillatorModel::default_example(40).unwrap()
}

fn drive(m: &OscillatorModel) -> impl Fn(f64) -> (C64, C64) + '_ {
    move |t| (m.z(t), m.z_dot(t))
}

fn fidelity(w: &CMat, a: &CVec, b: &CVec) -> f64 {
    let ab = sandwich(a, w, b).norm_sqr();
    ab / (sandwich(a, w, a).re * sandwich(b, w, b).re)
}

#[test]
fn gauge_field_of_a_constant_metric_vanishes() {
    let w = MetricFamily::new(2, |l: &[f64]| {
        CMat::from_row_slice(2, 2, &[c(2.0 + l[0], 0.0), c(0.0, 0.3), c(0.0, -0.3), c(1.0, 0.0)])
    });
    let path = ParameterPath::stationary(vec![0.4], 1.0);
    let k = gauge_field(&w, &path, 0.3, 1e-4).unwrap();
    assert!(max_abs(&k) < 1e-14);
}

#[test]
fn gauge_field_of_an_exponential_metric() {
    let w = MetricFamily::new(2, |l: &[f64]| {
        CMat::from_diagonal(&CVec::from_vec(vec![c((2.0 * l[0]).exp(), 0.0), c(1.0, 0.0)]))
    });
    let path = ParameterPath::new(1, 1.0, |t| vec![t]);
    for t in [0.0, 0.25, 0.8] {
        let k = gauge_field(&w, &path, t, 1e-4).unwrap();
        let expect = CMat::from_diagonal(&CVec::from_vec(vec![c(-1.0, 0.0), c(0.0, 0.0)]));
        assert!(max_abs_diff(&k, &expect) < 1e-8, "t = {t}");
    }
}

#[test]
fn oscillator_gauge_field_closed_form() {
    let m = model();
    let tol = Tolerances::default();
    let sc = m.pt_scenario(&tol).unwrap();
    let n = m.n;
    for t in [0.4, 1.3, 3.9, 5.5] {
        let k = gauge_field(&sc.w, &sc.path, t, 1e-6).unwrap();
        let (z, zd) = (m.z(t), m.z_dot(t));
        let expect = -(&m.ops.adag * zd + &m.ops.a * zd.conj() + CMat::identity(n, n) * (2.0 * z * zd.conj()));
        let mut worst = 0.0f64;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                worst = worst.max((k[(i, j)] - expect[(i, j)]).norm());
            }
        }
        assert!(worst <= 1e-8, "t = {t}: {worst:e}");
    }
}

#[test]
fn gauge_field_is_physically_hermitian() {
    let m = model();
    let sc = m.pt_scenario(&Tolerances::default()).unwrap();
    let r = gauge_field_hermiticity(&sc.w, &sc.path, 24).unwrap();
    assert!(r <= 1e-10, "{r:e}");

    let sc = two_level::loop_scenario((1.0, 0.5), 0.2, 2.0 * PI, &Tolerances::default()).unwrap();
    let r = gauge_field_hermiticity(&sc.w, &sc.path, 24).unwrap();
    assert!(r <= 1e-10, "{r:e}");
}

#[test]
fn zero_generator_keeps_the_state() {
    let tol = Tolerances::default();
    let w = MetricFamily::constant(CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]));
    let psi0 = PhysicalState::new(CVec::from_vec(vec![c(0.3, 0.2), c(-0.4, 0.1)]), vec![0.0])
        .normalized(&w)
        .unwrap();
    let path = ParameterPath::stationary(vec![0.0], 3.0);
    let rec = evolve(&HamiltonianFamily::zero(2), &w, &path, &psi0, 50, &tol).unwrap();
    for s in &rec.states {
        assert!((&s.vec - &psi0.vec).norm() < 1e-15);
    }
}

#[test]
fn standard_quantum_mechanics_reduction() {
    let tol = Tolerances::default();
    let h = CMat::from_row_slice(3, 3, &[
        c(1.0, 0.0), c(0.2, -0.3), c(0.0, 0.0),
        c(0.2, 0.3), c(-0.5, 0.0), c(0.4, 0.0),
        c(0.0, 0.0), c(0.4, 0.0), c(0.7, 0.0),
    ]);
    let psi0 = PhysicalState::new(CVec::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]), vec![0.0]);
    let path = ParameterPath::stationary(vec![0.0], 2.5);
    let rec = evolve(&HamiltonianFamily::constant(h.clone()), &MetricFamily::identity(3), &path, &psi0, 400, &tol).unwrap();
    let exact = unitary_exp(&h, 2.5) * &psi0.vec;
    assert!((&rec.states.last().unwrap().vec - exact).norm() < 1e-9);
}

#[test]
fn coherent_initial_state_follows_the_propagator() {
    let m = model();
    let tol = Tolerances::default();
    let sc = m.pt_scenario(&tol).unwrap();
    let cst = c(0.2, -0.1);
    let psi0 = PhysicalState::new(coherent_state(cst, m.n, 1e-14).unwrap(), vec![0.0, 0.0]);
    let rec = evolve(&sc.h, &sc.w, &sc.path, &psi0, 2000, &tol).unwrap();
    let z = drive(&m);
    for k in [250usize, 700, 1333, 2000] {
        let t = rec.times[k];
        let s = &rec.states[k];
        let wm = sc.w.eval(&s.lambda);
        let u = propagator_oscillator(&z, t, &m.ops, &tol).unwrap();
        let prop = u * &psi0.vec;
        assert!(fidelity(&wm, &prop, &s.vec) >= 1.0 - 1e-8);
        let closed = exp_raising(-2.0 * m.z(t), m.n) * coherent_state(m.z(t) + cst, m.n, 1e-14).unwrap();
        assert!(fidelity(&wm, &closed, &s.vec) >= 1.0 - 1e-8, "t = {t}");
    }
}

#[test]
fn propagator_at_zero_drive_is_identity() {
    let ops = build_fock_ops(12).unwrap();
    let tol = Tolerances::default();
    let zero = |_: f64| (c(0.0, 0.0), c(0.0, 0.0));
    let u = propagator_oscillator(&zero, 1.0, &ops, &tol).unwrap();
    assert!(max_abs_diff(&u, &CMat::identity(12, 12)) < 1e-14);
}

#[test]
fn propagator_first_order_expansion() {
    let n = 10;
    let ops = build_fock_ops(n).unwrap();
    let tol = Tolerances::default();
    let z0 = c(0.6, 0.8) * 1e-5;
    let lin = move |t: f64| (z0 * t, z0);
    let u = propagator_oscillator(&lin, 1.0, &ops, &tol).unwrap();
    let first = CMat::identity(n, n) - &ops.adag * z0 - &ops.a * z0.conj();
    assert!(max_abs_diff(&u, &first) < 1e-8);
}

#[test]
fn propagator_truncation_error_names_the_cutoff() {
    let ops = build_fock_ops(5).unwrap();
    let big = |t: f64| (c(2.0 * t, 0.0), c(2.0, 0.0));
    match propagator_oscillator(&big, 1.0, &ops, &Tolerances::default()) {
        Err(PtqmError::Truncation { required, .. }) => assert!(required > 5),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn full_loop_propagator_matches_the_integrator() {
    let m = model();
    let tol = Tolerances::default();
    let sc = m.pt_scenario(&tol).unwrap();
    let rec = sc.evolve(2000, &tol).unwrap();
    let z = drive(&m);
    let u = propagator_oscillator(&z, m.tau(), &m.ops, &tol).unwrap();
    let end = &rec.states.last().unwrap().vec;
    let prop = &u * &sc.psi0.vec;
    assert!((end - &prop).norm() < 1e-8, "{:e}", (end - &prop).norm());
    let ray = sc.psi0.vec.clone() * C64::from_polar(1.0, m.gamma_exact(m.tau()));
    assert!((prop - ray).norm() < 1e-10);
}

#[test]
fn propagator_phase_matches_the_time_ordered_product() {
    let m = model();
    let tol = Tolerances::default();
    let sc = m.pt_scenario(&tol).unwrap();
    let rec = sc.evolve(2000, &tol).unwrap();
    let z = drive(&m);
    for k in [400usize, 1100, 1700] {
        let u = propagator_oscillator(&z, rec.times[k], &m.ops, &tol).unwrap();
        let prop = u * &sc.psi0.vec;
        assert!((&rec.states[k].vec - prop).norm() < 1e-8, "k = {k}");
    }
}

#[test]
fn cyclic_detection_examples() {
    let tol = Tolerances::default();
    let w = MetricFamily::constant(CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(1.0, 0.0)]));
    let psi0 = PhysicalState::new(e(2, 1), vec![0.0]).normalized(&w).unwrap();
    let path = ParameterPath::stationary(vec![0.0], 1.0);
    let rec = evolve(&HamiltonianFamily::zero(2), &w, &path, &psi0, 20, &tol).unwrap();
    let rep = detect_cyclic(&rec, &w, &tol).unwrap();
    assert!(rep.cyclic);
    assert_eq!(rep.alpha, 0.0);

    let (e0, e1, tau) = (1.3, -0.4, 2.1);
    let h = CMat::from_diagonal(&CVec::from_vec(vec![c(e0, 0.0), c(e1, 0.0)]));
    let psi0 = PhysicalState::new(e(2, 0), vec![0.0]);
    let path = ParameterPath::stationary(vec![0.0], tau);
    let rec = evolve(&HamiltonianFamily::constant(h), &MetricFamily::identity(2), &path, &psi0, 200, &tol).unwrap();
    let rep = detect_cyclic(&rec, &MetricFamily::identity(2), &tol).unwrap();
    assert!(rep.cyclic);
    assert!((rep.alpha - wrap_phase(-e0 * tau)).abs() < 1e-9);
}

#[test]
fn oscillator_loop_is_cyclic_with_the_area_phase() {
    let m = model();
    let tol = Tolerances::default();
    let sc = m.pt_scenario(&tol).unwrap();
    let rec = sc.evolve(2000, &tol).unwrap();
    let rep = detect_cyclic(&rec, &sc.w, &tol).unwrap();
    assert!(rep.cyclic, "{rep:?}");
    let area = signed_area(&m, 1 << 14);
    assert!((rep.alpha - 2.0 * area).abs() < 1e-6, "{} vs {}", rep.alpha, 2.0 * area);
}

#[test]
fn cyclic_detection_rejects_open_paths() {
    let tol = Tolerances::default();
    let path = ParameterPath::new(1, 1.0, |t| vec![t]);
    let psi0 = PhysicalState::new(e(2, 0), vec![0.0]);
    let w = MetricFamily::identity(2);
    let rec = evolve(&HamiltonianFamily::zero(2), &w, &path, &psi0, 10, &tol).unwrap();
    assert!(matches!(detect_cyclic(&rec, &w, &tol), Err(PtqmError::Precondition(_))));
}

#[test]
fn physical_overlap_is_conserved() {
    let m = model();
    let tol = Tolerances::default();
    let sc = m.pt_scenario(&tol).unwrap();
    let phi0 = PhysicalState::new(coherent_state(c(-0.1, 0.25), m.n, 1e-14).unwrap(), vec![0.0, 0.0]);
    let a = sc.evolve(1000, &tol).unwrap();
    let b = evolve(&sc.h, &sc.w, &sc.path, &phi0, 1000, &tol).unwrap();
    let start = sandwich(&a.states[0].vec, &sc.w.eval(&a.states[0].lambda), &b.states[0].vec);
    for k in (0..a.len()).step_by(50) {
        let wm = sc.w.eval(&a.states[k].lambda);
        let now = sandwich(&a.states[k].vec, &wm, &b.states[k].vec);
        assert!((now - start).norm() <= tol.unitarity, "k = {k}");
    }

    let sc = two_level::loop_scenario((1.0, 0.5), 0.2, 2.0 * PI, &tol).unwrap();
    let other = PhysicalState::new(CVec::from_vec(vec![c(0.3, 0.1), c(0.2, -0.5)]), sc.psi0.lambda.clone())
        .normalized(&sc.w)
        .unwrap();
    let a = sc.evolve(1000, &tol).unwrap();
    let b = evolve(&sc.h, &sc.w, &sc.path, &other, 1000, &tol).unwrap();
    let start = sandwich(&a.states[0].vec, &sc.w.eval(&a.states[0].lambda), &b.states[0].vec);
    for k in (0..a.len()).step_by(50) {
        let wm = sc.w.eval(&a.states[k].lambda);
        let now = sandwich(&a.states[k].vec, &wm, &b.states[k].vec);
        assert!((now - start).norm() <= tol.unitarity, "k = {k}");
    }
}

#[test]
fn fourth_order_convergence() {
    let m = OscillatorModel::default_example(30).unwrap();
    let tol = Tolerances::default();
    let sc = m.pt_scenario(&tol).unwrap();
    let z = drive(&m);
    let exact = propagator_oscillator(&z, m.tau(), &m.ops, &tol).unwrap() * &sc.psi0.vec;
    let errs: Vec<f64> = [60usize, 120, 240]
        .iter()
        .map(|&steps| (&sc.evolve(steps, &tol).unwrap().states.last().unwrap().vec - &exact).norm())
        .collect();
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((12.0..=20.0).contains(&ratio), "errors {errs:?}");
    }
}

#[test]
fn total_phase_ignores_the_initial_global_phase() {
    let m = model();
    let tol = Tolerances::default();
    let sc = m.pt_scenario(&tol).unwrap();
    let base = detect_cyclic(&sc.evolve(800, &tol).unwrap(), &sc.w, &tol).unwrap();
    let shifted = PhysicalState::new(sc.psi0.vec.clone() * C64::from_polar(1.0, 0.7), sc.psi0.lambda.clone());
    let rec = evolve(&sc.h, &sc.w, &sc.path, &shifted, 800, &tol).unwrap();
    let rep = detect_cyclic(&rec, &sc.w, &tol).unwrap();
    assert!((rep.alpha - base.alpha).abs() < 1e-12);
}

#[test]
fn non_uniform_grid_and_record_round_trip() {
    let tol = Tolerances::default();
    let h = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5, 0.0), c(-0.5, 0.0)]));
    let psi0 = PhysicalState::new(CVec::from_vec(vec![c(0.6, 0.0), c(0.8, 0.0)]), vec![0.0]);
    let path = ParameterPath::stationary(vec![0.0], 1.0);
    let times: Vec<f64> = (0..=20).map(|k| (k as f64 / 20.0).powi(2)).collect();
    let rec = evolve_on_grid(&HamiltonianFamily::constant(h.clone()), &MetricFamily::identity(2), &path, &psi0, &times, 0.01, &tol)
        .unwrap();
    for (s, &t) in rec.states.iter().zip(&times) {
        assert!((&s.vec - unitary_exp(&h, t) * &psi0.vec).norm() < 1e-10);
    }
    let back = EvolutionRecord::from_json(&rec.to_json()).unwrap();
    assert_eq!(back.len(), rec.len());
    for (a, b) in back.states.iter().zip(&rec.states) {
        assert!((&a.vec - &b.vec).norm() < 1e-15);
    }
}

#[test]
fn dimension_mismatch_is_structural() {
    let tol = Tolerances::default();
    let psi0 = PhysicalState::new(e(3, 0), vec![0.0]);
    let path = ParameterPath::stationary(vec![0.0], 1.0);
    let r = evolve(&HamiltonianFamily::zero(2), &MetricFamily::identity(2), &path, &psi0, 10, &tol);
    assert!(matches!(r, Err(PtqmError::Dimension { .. })));
}
