use std::f64::consts::PI;

use ptqm_core::evolution::{evolve, evolve_on_grid, gauge_field, EvolutionRecord, ParameterPath};
use ptqm_core::geometry::parallel_transport_residual;
use ptqm_core::golden::acceptance_scenarios;
use ptqm_core::hilbert::{BiDensity, HamiltonianFamily, MetricFamily, PhysicalState};
use ptqm_core::linalg::{c, phase_distance, sandwich, CMat, CVec};
use ptqm_core::models::oscillator::{signed_area, OscillatorModel};
use ptqm_core::models::{standard_qm, two_level, LoopScenario};
use ptqm_core::phases::{
    dynamical_phase, geometric_phase_bargmann, geometric_phase_gauge_invariant, geometric_phase_gauge_split,
    geometric_phase_holonomy, geometric_phase_kinematic, gw_identity_residual, gw_phases,
    parallel_transport_gauge, PhaseReport,
};
use ptqm_core::{PtqmError, Tolerances};

fn routes(rec: &EvolutionRecord, w: &MetricFamily, tol: &Tolerances) -> Vec<f64> {
    let d = rec.densities(w);
    vec![
        geometric_phase_gauge_split(rec, w, tol).unwrap(),
        geometric_phase_gauge_invariant(rec, w, tol).unwrap(),
        geometric_phase_kinematic(&d, tol).unwrap(),
        geometric_phase_bargmann(&d, tol).unwrap(),
        geometric_phase_holonomy(rec, w, tol).unwrap(),
    ]
}

fn oscillator(tol: &Tolerances) -> (OscillatorModel, LoopScenario, EvolutionRecord) {
    let m = OscillatorModel::default_example(40).unwrap();
    let sc = m.pt_scenario(tol).unwrap();
    let rec = sc.evolve(2000, tol).unwrap();
    (m, sc, rec)
}

fn trivial(tol: &Tolerances) -> (MetricFamily, EvolutionRecord) {
    let w = MetricFamily::constant(CMat::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(1.0, 0.0)]));
    let psi0 = PhysicalState::new(CVec::from_vec(vec![c(0.5, 0.1), c(0.3, -0.4)]), vec![0.0])
        .normalized(&w)
        .unwrap();
    let path = ParameterPath::stationary(vec![0.0], 1.0);
    let rec = evolve(&HamiltonianFamily::zero(2), &w, &path, &psi0, 40, tol).unwrap();
    (w, rec)
}

#[test]
fn dynamical_phase_examples() {
    let tol = Tolerances::default();
    let (_, sc, rec) = oscillator(&tol);
    assert_eq!(dynamical_phase(&rec, &sc.h, &sc.w, &tol).unwrap(), 0.0);

    let (e0, tau) = (0.7, 1.9);
    let h = HamiltonianFamily::constant(CMat::from_diagonal(&CVec::from_vec(vec![c(e0, 0.0), c(-1.2, 0.0)])));
    let w = MetricFamily::identity(2);
    let psi0 = PhysicalState::new(CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), vec![0.0]);
    let rec = evolve(&h, &w, &ParameterPath::stationary(vec![0.0], tau), &psi0, 100, &tol).unwrap();
    assert!((dynamical_phase(&rec, &h, &w, &tol).unwrap() + e0 * tau).abs() < 1e-12);
}

#[test]
fn dynamical_phase_converges_on_a_two_level_loop() {
    let tol = Tolerances::default();
    let sc = two_level::loop_scenario((1.1, 0.4), 0.25, 3.0, &tol).unwrap();
    let coarse = dynamical_phase(&sc.evolve(1000, &tol).unwrap(), &sc.h, &sc.w, &tol).unwrap();
    let fine = dynamical_phase(&sc.evolve(2000, &tol).unwrap(), &sc.h, &sc.w, &tol).unwrap();
    assert!((coarse - fine).abs() < 1e-8, "{coarse} vs {fine}");
}

#[test]
fn trivial_records_carry_no_geometric_phase() {
    let tol = Tolerances::default();
    let (w, rec) = trivial(&tol);
    for g in routes(&rec, &w, &tol) {
        assert!(g.abs() < 1e-12, "{g}");
    }
    let rho = rec.densities(&w)[0].clone();
    let constant: Vec<BiDensity> = vec![rho; 12];
    assert!(geometric_phase_kinematic(&constant, &tol).unwrap().abs() < 1e-15);
}

#[test]
fn oscillator_phase_is_twice_the_signed_area() {
    let tol = Tolerances::default();
    let (m, sc, rec) = oscillator(&tol);
    let oracle = 2.0 * signed_area(&m, 1 << 14);
    assert!((oracle + 2.0 * PI * 0.09).abs() < 1e-7);
    assert!((oracle + 0.565487).abs() < 1e-6);
    for g in routes(&rec, &sc.w, &tol) {
        assert!(phase_distance(g, oracle) < 1e-6, "{g} vs {oracle}");
    }
}

#[test]
fn great_circle_gives_minus_pi() {
    let tol = Tolerances::default();
    let sc = standard_qm::great_circle_scenario(1.0).unwrap();
    let rec = sc.evolve(2000, &tol).unwrap();
    for g in routes(&rec, &sc.w, &tol) {
        assert!(phase_distance(g, -PI) < 1e-6, "{g}");
    }
}

#[test]
fn routes_are_reparametrization_invariant() {
    let tol = Tolerances::default();
    let (m, sc, rec) = oscillator(&tol);
    let times: Vec<f64> = (0..=2000).map(|k| m.tau() * (k as f64 / 2000.0).powi(2)).collect();
    let warped = evolve_on_grid(&sc.h, &sc.w, &sc.path, &sc.psi0, &times, m.tau() / 4000.0, &tol).unwrap();
    for (a, b) in routes(&rec, &sc.w, &tol).iter().zip(routes(&warped, &sc.w, &tol)) {
        assert!(phase_distance(*a, b) < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn routes_are_gauge_invariant() {
    let tol = Tolerances::default();
    for (sc, rec) in acceptance_scenarios(&tol).unwrap() {
        let tau = rec.tau();
        let re = rec.regauged(|t| 0.8 * (2.0 * PI * t / tau).sin() + 0.3 * (1.0 - (4.0 * PI * t / tau).cos()));
        for (a, b) in routes(&rec, &sc.w, &tol).iter().zip(routes(&re, &sc.w, &tol)) {
            assert!(phase_distance(*a, b) < 1e-6, "{}: {a} vs {b}", sc.name);
        }
    }
}

#[test]
fn decomposition_identities_hold_on_every_scenario() {
    let tol = Tolerances::default();
    for (sc, rec) in acceptance_scenarios(&tol).unwrap() {
        let report = PhaseReport::compute(&rec, &sc.h, &sc.w, &tol).unwrap();
        assert!(report.all_pass(), "{}: {:?}", sc.name, report.residuals);
        assert!(phase_distance(report.alpha, report.beta + report.gamma) < tol.phase);
        let sum = report.gw_beta + report.gw_gamma;
        assert!(phase_distance(report.alpha, sum.re) < tol.phase && sum.im.abs() < tol.phase);
    }
}

#[test]
fn kinematic_route_needs_a_closed_curve() {
    let tol = Tolerances::default();
    let h = HamiltonianFamily::constant(CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]));
    let psi0 = PhysicalState::new(CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), vec![0.0]);
    let w = MetricFamily::identity(2);
    let rec = evolve(&h, &w, &ParameterPath::stationary(vec![0.0], 1.0), &psi0, 50, &tol).unwrap();
    assert!(matches!(geometric_phase_kinematic(&rec.densities(&w), &tol), Err(PtqmError::Precondition(_))));
    assert!(matches!(dynamical_phase(&rec, &h, &w, &tol), Err(PtqmError::Precondition(_))));
}

#[test]
fn alternative_split_with_constant_metric_is_ours() {
    let tol = Tolerances::default();
    let sc = standard_qm::great_circle_scenario(1.0).unwrap();
    let rec = sc.evolve(2000, &tol).unwrap();
    let gw = gw_phases(&rec, &sc.h, &sc.w, &tol).unwrap();
    let beta = dynamical_phase(&rec, &sc.h, &sc.w, &tol).unwrap();
    let gamma = geometric_phase_gauge_split(&rec, &sc.w, &tol).unwrap();
    assert!((gw.gw_beta - c(beta, 0.0)).norm() < 1e-12);
    assert!(phase_distance(gw.gw_gamma.re, gamma) < 1e-9 && gw.gw_gamma.im.abs() < 1e-12);
}

#[test]
fn oscillator_gauge_term_integrates_to_zero_over_the_loop() {
    let tol = Tolerances::default();
    let (m, sc, rec) = oscillator(&tol);
    // <<psi|K psi>> = -d|z|^2/dt along the loop: nonzero, but a total derivative
    let mut peak = 0.0f64;
    for k in (0..rec.len()).step_by(97) {
        let t = rec.times[k];
        let s = &rec.states[k];
        let kmat = gauge_field(&sc.w, &sc.path, t, 1e-6).unwrap();
        let v = sandwich(&s.vec, &(sc.w.eval(&s.lambda) * kmat), &s.vec);
        let (z, zd) = (m.z(t), m.z_dot(t));
        let expect = -2.0 * (z.conj() * zd).re;
        assert!((v - c(expect, 0.0)).norm() < 1e-8, "t = {t}");
        peak = peak.max(expect.abs());
    }
    assert!(peak > 0.1);
    let gw = gw_phases(&rec, &sc.h, &sc.w, &tol).unwrap();
    let gamma = geometric_phase_gauge_split(&rec, &sc.w, &tol).unwrap();
    let alpha = ptqm_core::evolution::detect_cyclic(&rec, &sc.w, &tol).unwrap().alpha;
    assert!(gw.gauge_term.norm() < 1e-6);
    assert!(phase_distance(gw.gw_gamma.re, gamma) < 1e-6 && gw.gw_gamma.im.abs() < 1e-6);
    let sum = gw.gw_beta + gw.gw_gamma;
    assert!(phase_distance(sum.re, alpha) < 1e-6 && sum.im.abs() < 1e-6);
}

#[test]
fn alternative_split_identity_on_a_two_level_loop() {
    let tol = Tolerances::default();
    let sc = two_level::loop_scenario((1.2, 0.3), 0.3, 2.5, &tol).unwrap();
    let rec = sc.evolve(2000, &tol).unwrap();
    let gw = gw_phases(&rec, &sc.h, &sc.w, &tol).unwrap();
    let beta = dynamical_phase(&rec, &sc.h, &sc.w, &tol).unwrap();
    let gamma = geometric_phase_gauge_split(&rec, &sc.w, &tol).unwrap();
    assert!(gw_identity_residual(gamma, beta, &gw) < 1e-8);
}

#[test]
fn hermitian_picture_splits_the_same_total_phase_differently() {
    let tol = Tolerances::default();
    let m = OscillatorModel::default_example(40).unwrap();
    let sc = m.hermitian_scenario(&tol).unwrap();
    let rec = sc.evolve(2000, &tol).unwrap();
    let report = PhaseReport::compute(&rec, &sc.h, &sc.w, &tol).unwrap();
    let area = signed_area(&m, 1 << 14);
    assert!(phase_distance(report.alpha, 2.0 * area) < 1e-6);
    assert!((report.beta - 4.0 * area).abs() < 1e-6);
    assert!(phase_distance(report.gamma, -2.0 * area) < 1e-6);
    assert!((report.eta.unwrap() + 2.0).abs() < 1e-6);
}

#[test]
fn parallel_transport_residuals() {
    let tol = Tolerances::default();
    let (_, sc, rec) = oscillator(&tol);
    let gauge = parallel_transport_gauge(&rec, &sc.w).unwrap();
    assert!(parallel_transport_residual(&gauge, &rec.times, &sc.w) <= 1e-8);
    // with H = 0 the raw evolution is already parallel
    assert!(parallel_transport_residual(&rec.states, &rec.times, &sc.w) <= 1e-6);

    let e0 = 0.9;
    let h = HamiltonianFamily::constant(CMat::from_diagonal(&CVec::from_vec(vec![c(e0, 0.0), c(-0.3, 0.0)])));
    let w = MetricFamily::identity(2);
    let psi0 = PhysicalState::new(CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), vec![0.0]);
    let rec = evolve(&h, &w, &ParameterPath::stationary(vec![0.0], 2.0), &psi0, 400, &tol).unwrap();
    let r = parallel_transport_residual(&rec.states, &rec.times, &w);
    assert!((r - e0).abs() < 1e-3, "{r}");

    let (w, rec) = trivial(&tol);
    assert!(parallel_transport_residual(&rec.states, &rec.times, &w) < 1e-15);
}
