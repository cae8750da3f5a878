use std::f64::consts::PI;

use ptqm_core::evolution::ParameterPath;
use ptqm_core::geometry::{
    classify_evolution, connection, curvature, curvature_from_connection, curvature_plot_csv, fidelity,
    geometric_tensors, line_element, loop_integral_connection, metric_tensor, polygon_loop_integral, qgt,
    square_loop, surface_integral_curvature, tensor_field, tensor_field_csv, EvolutionClass, Patch, StateSection,
};
use ptqm_core::golden::oscillator_section_loop;
use ptqm_core::hilbert::MetricFamily;
use ptqm_core::linalg::{braket, c, max_abs_diff, phase_distance, CMat, CVec, C64};
use ptqm_core::models::oscillator::{reference_curvature, reference_metric, reference_qgt, section_oscillator, OscillatorModel};
use ptqm_core::models::standard_qm::{bloch_section, bloch_state, great_circle_curve};
use ptqm_core::models::two_level;
use ptqm_core::phases::geometric_phase_gauge_split;
use ptqm_core::Tolerances;

const P: [f64; 4] = [0.12, -0.07, 0.2, 0.15];

fn osc() -> StateSection {
    section_oscillator(40)
}

/// A normalized three-level section for the textbook comparison.
fn qutrit() -> StateSection {
    StateSection::new(2, MetricFamily::identity(3), 0, |x: &[f64]| {
        let v = CVec::from_vec(vec![c(1.0, 0.0), c(x[0], x[1]), C64::from_polar(x[0] * x[1] + 0.5, x[0] - 2.0 * x[1])]);
        let n = v.norm();
        v.unscale(n)
    })
}

/// `<d phi|(1 - |phi><phi|)|d phi>` from plain central differences.
fn textbook_qgt(f: impl Fn(&[f64]) -> CVec, x: &[f64]) -> CMat {
    let m = x.len();
    let h = 1e-5;
    let phi = f(x);
    let d: Vec<CVec> = (0..m)
        .map(|mu| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[mu] += h;
            xm[mu] -= h;
            (f(&xp) - f(&xm)).unscale(2.0 * h)
        })
        .collect();
    CMat::from_fn(m, m, |i, j| braket(&d[i], &d[j]) - braket(&d[i], &phi) * braket(&phi, &d[j]))
}

#[test]
fn connection_examples() {
    let tol = Tolerances::default();
    let real = StateSection::new(1, MetricFamily::identity(2), 0, |x: &[f64]| {
        CVec::from_vec(vec![c(x[0].cos(), 0.0), c(x[0].sin(), 0.0)])
    });
    assert!(connection(&real, &[0.4], &tol).unwrap()[0].abs() < 1e-15);

    let w = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
    let phi0 = CVec::from_vec(vec![c(0.5, 0.0), c(1.0, 0.0)]);
    let pure = StateSection::new(3, MetricFamily::constant(w), 0, move |x: &[f64]| phi0.clone() * C64::from_polar(1.0, x[0]));
    let a = connection(&pure, &[0.3, -1.0, 2.0], &tol).unwrap();
    assert!((a[0] - 1.0).abs() < 1e-9 && a[1].abs() < 1e-12 && a[2].abs() < 1e-12, "{a:?}");
}

#[test]
fn oscillator_connection_closed_form() {
    let tol = Tolerances::default();
    let s = osc();
    for x in [P, [-0.1, 0.2, 0.05, -0.25]] {
        let expect = [2.0 * x[3], -2.0 * x[2], -x[3], x[2]];
        for sec in [s.clone(), s.clone().numeric()] {
            let a = connection(&sec, &x, &tol).unwrap();
            for (got, want) in a.iter().zip(expect) {
                assert!((got - want).abs() < 1e-6, "{a:?} vs {expect:?}");
            }
        }
    }
}

#[test]
fn curvature_examples() {
    let tol = Tolerances::default();
    let constant = StateSection::new(2, MetricFamily::identity(2), 0, |_: &[f64]| CVec::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]));
    assert!(curvature(&constant, &[0.1, 0.2], &tol).unwrap().amax() < 1e-15);

    // 2 Omega is the two-form coefficient; the sign is opposite to the
    // i<phi|d phi> connection convention, which gives -1/2 sin(theta)
    for theta in [0.4, 1.2, 2.5] {
        let om = curvature(&bloch_section(), &[theta, 0.7], &tol).unwrap();
        assert!((2.0 * om[(0, 1)] - 0.5 * f64::sin(theta)).abs() < 1e-8);
        assert!((om[(0, 1)] + om[(1, 0)]).abs() < 1e-15);
    }

    for x in [P, [0.0; 4]] {
        let om = curvature(&osc(), &x, &tol).unwrap();
        assert!((om - reference_curvature()).amax() < 1e-6);
    }
}

#[test]
fn curvature_agrees_with_the_curl_of_the_connection() {
    let tol = Tolerances::default();
    for (s, x) in [(osc(), P.to_vec()), (bloch_section(), vec![1.1, 0.3]), (two_level::section(), vec![1.0, 0.4, 0.9, 0.2])] {
        let direct = curvature(&s, &x, &tol).unwrap();
        let curl = curvature_from_connection(&s, &x, 1e-3, &tol).unwrap();
        assert!((direct - curl).amax() < 1e-6);
    }
}

#[test]
fn metric_examples() {
    let tol = Tolerances::default();
    let g = metric_tensor(&osc(), &P, &tol).unwrap();
    assert!((g - reference_metric()).amax() < 1e-6);

    for theta in [0.5, 1.9] {
        let g = metric_tensor(&bloch_section(), &[theta, -0.4], &tol).unwrap();
        assert!((g[(0, 0)] - 0.25).abs() < 1e-8);
        assert!((g[(1, 1)] - 0.25 * theta.sin().powi(2)).abs() < 1e-8);
        assert!(g[(0, 1)].abs() < 1e-8);
    }
}

#[test]
fn identity_metric_matches_the_textbook_tensor() {
    let tol = Tolerances::default();
    let bloch = |x: &[f64]| bloch_state(x[0], x[1]);
    for x in [[0.7, 0.2], [2.2, -1.0]] {
        let q = qgt(&bloch_section(), &x, &tol).unwrap();
        assert!(max_abs_diff(&q, &textbook_qgt(bloch, &x)) < 1e-8);
    }
    let s = qutrit();
    for x in [[0.3, -0.2], [-0.5, 0.8]] {
        let q = qgt(&s, &x, &tol).unwrap();
        assert!(max_abs_diff(&q, &textbook_qgt(|y: &[f64]| s.phi(y), &x)) < 1e-8);
    }
}

#[test]
fn oscillator_qgt_and_gauge_invariance() {
    let tol = Tolerances::default();
    let base = osc();
    let q = qgt(&base, &P, &tol).unwrap();
    assert!(max_abs_diff(&q, &reference_qgt()) < 1e-6);

    let theta = |x: &[f64]| 0.7 * x[0] * x[0] - 1.3 * x[1] + (2.0 * x[2]).sin() + x[1] * x[3];
    let grad = |x: &[f64]| [1.4 * x[0], -1.3 + x[3], 2.0 * (2.0 * x[2]).cos(), x[1]];
    let re = base.regauged(theta);
    let t0 = geometric_tensors(&base, &P, &tol).unwrap();
    let t1 = geometric_tensors(&re, &P, &tol).unwrap();
    assert!(max_abs_diff(&t0.q, &t1.q) < 1e-6);
    assert!((&t0.omega - &t1.omega).amax() < 1e-6);
    assert!((&t0.g - &t1.g).amax() < 1e-6);
    for (mu, d) in grad(&P).iter().enumerate() {
        assert!((t1.a[mu] - t0.a[mu] - d).abs() < 1e-6);
    }
}

#[test]
fn fidelity_examples() {
    let tol = Tolerances::default();
    let s = osc();
    let rho = s.density(&P);
    let f = fidelity(&rho, &rho, s.metric(), &tol).unwrap();
    assert!((f.value - 1.0).abs() < 1e-10);

    let b = bloch_section();
    let up = b.density(&[0.0, 0.0]);
    let down = b.density(&[PI, 0.0]);
    assert!(fidelity(&up, &down, b.metric(), &tol).unwrap().value < 1e-12);

    let g = metric_tensor(&s, &P, &tol).unwrap();
    let delta = [0.6e-3, -0.3e-3, 0.5e-3, 0.54e-3];
    let shifted: Vec<f64> = P.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let f = fidelity(&rho, &s.density(&shifted), s.metric(), &tol).unwrap();
    let mut q = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            q += g[(i, j)] * delta[i] * delta[j];
        }
    }
    assert!((f.value - (1.0 - 0.5 * q)).abs() < 1e-8);
}

#[test]
fn line_element_examples() {
    let tol = Tolerances::default();
    let s = osc();
    assert_eq!(line_element(&s, &P, &[0.0; 4], &tol).unwrap(), 0.0);
    for (a, b) in [(1.0, 0.0), (0.3, -0.4), (-1.2, 0.5)] {
        let ds2 = line_element(&s, &P, &[a, b, a, b], &tol).unwrap();
        assert!((ds2 + a * a + b * b).abs() < 1e-6);
    }
    let d = [0.2, -0.5, 0.7, 0.1];
    let expect = -2.0 * d[0] * d[2] - 2.0 * d[1] * d[3] + d[2] * d[2] + d[3] * d[3];
    assert!((line_element(&s, &P, &d, &tol).unwrap() - expect).abs() < 1e-6);
}

#[test]
fn classification_examples() {
    let tol = Tolerances::default();
    let still = ParameterPath::stationary(P.to_vec(), 1.0);
    for sample in classify_evolution(&osc(), &still, 8, &tol).unwrap() {
        assert_eq!(sample.class, EvolutionClass::Lightlike);
    }

    let m = OscillatorModel::default_example(40).unwrap();
    let curve = oscillator_section_loop(&m);
    for sample in classify_evolution(&osc(), &curve, 24, &tol).unwrap() {
        assert_eq!(sample.class, EvolutionClass::Timelike);
        assert!((sample.ds2 + m.z_dot(sample.t).norm_sqr()).abs() < 1e-6);
    }

    let arc = great_circle_curve(1.0);
    for sample in classify_evolution(&bloch_section(), &arc, 24, &tol).unwrap() {
        assert_ne!(sample.class, EvolutionClass::Timelike);
    }
    let wiggle = ParameterPath::new(2, 1.0, |t| vec![1.0 + 0.3 * (7.0 * t).sin(), (3.0 * t).cos()]);
    for sample in classify_evolution(&bloch_section(), &wiggle, 24, &tol).unwrap() {
        assert_ne!(sample.class, EvolutionClass::Timelike);
    }
}

#[test]
fn loop_integral_examples() {
    let tol = Tolerances::default();
    let s = osc();
    let back_and_forth = ParameterPath::new(4, 1.0, |t| {
        let u = (2.0 * PI * t).sin();
        vec![P[0] + 0.1 * u, P[1] - 0.05 * u, P[2] + 0.08 * u, P[3]]
    })
    .closed(1e-12)
    .unwrap();
    assert!(loop_integral_connection(&s, &back_and_forth, 256, &tol).unwrap().abs() < 1e-10);

    let m = OscillatorModel::default_example(40).unwrap();
    let sc = m.pt_scenario(&tol).unwrap();
    let rec = sc.evolve(2000, &tol).unwrap();
    let gamma = geometric_phase_gauge_split(&rec, &sc.w, &tol).unwrap();
    let curve = oscillator_section_loop(&m);
    let loop_val = loop_integral_connection(&s, &curve, 512, &tol).unwrap();
    assert!(phase_distance(loop_val, gamma) < 1e-5, "{loop_val} vs {gamma}");

    let open = ParameterPath::new(4, 1.0, |t| vec![t, 0.0, 0.0, 0.0]);
    assert!(loop_integral_connection(&s, &open, 64, &tol).is_err());
}

#[test]
fn small_squares_recover_the_curvature() {
    let tol = Tolerances::default();
    let s = bloch_section();
    let x = [1.0, 0.4];
    let om = curvature(&s, &x, &tol).unwrap()[(0, 1)];
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let val = -polygon_loop_integral(&s, &square_loop(&x, (0, 1), h), 64, &tol).unwrap();
            (val + 2.0 * om * h * h).abs()
        })
        .collect();
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((7.0..=9.0).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn surface_integral_examples() {
    let tol = Tolerances::default();
    let s = osc();
    let flat = Patch::new(|u, _| vec![P[0] + 0.1 * u, P[1], P[2] - 0.1 * u, P[3]]);
    assert_eq!(surface_integral_curvature(&s, &flat, 8, 8, &tol).unwrap(), 0.0);

    let m = OscillatorModel::default_example(40).unwrap();
    let curve = oscillator_section_loop(&m);
    let disc = Patch::disc(vec![0.0, -0.3, 0.0, -0.3], curve);
    let surf = surface_integral_curvature(&s, &disc, 16, 64, &tol).unwrap();
    assert!(phase_distance(surf, m.gamma_exact(m.tau())) < 1e-4, "{surf}");

    for theta0 in [0.6, 1.4, 2.2] {
        let cap = Patch::new(move |u, v| vec![u * theta0, 2.0 * PI * v]);
        let surf = surface_integral_curvature(&bloch_section(), &cap, 128, 8, &tol).unwrap();
        let half_solid_angle = PI * (1.0 - f64::cos(theta0));
        assert!(phase_distance(surf, -half_solid_angle) < 1e-8, "{theta0}: {surf}");
    }
}

#[test]
fn tensor_symmetries_and_split() {
    let tol = Tolerances::default();
    for (s, x) in [(osc(), P.to_vec()), (two_level::section(), vec![1.1, 0.3, 0.8, -0.6]), (qutrit(), vec![0.2, 0.1])] {
        let t = geometric_tensors(&s, &x, &tol).unwrap();
        assert!((&t.omega + t.omega.transpose()).amax() < 1e-12);
        assert!((&t.g - t.g.transpose()).amax() < 1e-12);
        let (im, re, herm) = t.consistency();
        assert!(im < 1e-10 && re < 1e-10 && herm < 1e-10);
    }
}

#[test]
fn metric_spectrum_of_the_oscillator_section() {
    let tol = Tolerances::default();
    let t = geometric_tensors(&osc(), &P, &tol).unwrap();
    let ev = t.metric_eigenvalues();
    let (lo, hi) = ((1.0 - 5f64.sqrt()) / 2.0, (1.0 + 5f64.sqrt()) / 2.0);
    for (got, want) in ev.iter().zip([lo, lo, hi, hi]) {
        assert!((got - want).abs() < 1e-8, "{ev:?}");
    }
    assert!(!t.degenerate);
}

#[test]
fn tabular_outputs() {
    let tol = Tolerances::default();
    let pts = vec![P.to_vec(), vec![0.0; 4]];
    let fields: Vec<_> = tensor_field(&osc(), &pts, &tol).into_iter().map(|r| r.unwrap()).collect();
    let csv = tensor_field_csv(&fields);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    let cols = lines[0].split(',').count();
    assert_eq!(cols, 4 + 4 + 4 * 16);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == cols));

    let plot = curvature_plot_csv(&bloch_section(), &[1.0, 0.0], (0, 1), ((0.5, 2.5), (0.0, 1.0)), (5, 3), &tol).unwrap();
    assert_eq!(plot.lines().count(), 16);
    assert!(plot.starts_with("l1,l2,Omega12\n"));
}
