//! Turning a validated scenario into a loop to evolve, a state section to
//! measure, and the curve and surface used by classification and Stokes
//! checks.

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ptqm_core::evolution::{cyclic_initial_state, ParameterPath};
use ptqm_core::geometry::{Patch, StateSection};
use ptqm_core::golden::oscillator_section_loop;
use ptqm_core::hilbert::{MetricFamily, PhysicalState};
use ptqm_core::linalg::{c, CMat, CVec, C64};
use ptqm_core::models::oscillator::{reference_qgt, section_oscillator, signed_area, OscillatorModel};
use ptqm_core::models::standard_qm::{pauli, spin_half_family};
use ptqm_core::models::{two_level, LoopScenario};
use ptqm_core::{PtqmError, Result, Tolerances};

use crate::scenario::{PathSpec, Picture, Scenario};

pub struct Built {
    pub scenario: LoopScenario,
    pub section: StateSection,
    /// Section-coordinate curve traced by the loop.
    pub curve: ParameterPath,
    pub patch: Option<Patch>,
    /// The curve is the projected curve of the evolved state itself.
    pub curve_is_evolution: bool,
    pub exact_alpha: Option<f64>,
    pub area_gamma: Option<f64>,
    pub reference_q: Option<CMat>,
    /// `Some(true)`: every sample must be timelike; `Some(false)`: none may be.
    pub timelike: Option<bool>,
    /// Fock levels random states may occupy.
    pub random_support: usize,
}

pub fn build(s: &Scenario, tol: &Tolerances) -> Result<Built> {
    match s.model.name.as_str() {
        "oscillator" => oscillator(s, tol),
        "two_level" => two_level_model(s, tol),
        _ => standard_qm(s, tol),
    }
}

fn oscillator(s: &Scenario, tol: &Tolerances) -> Result<Built> {
    let m = &s.model;
    let model = OscillatorModel::new(s.run.truncation, m.number("omega_d"), m.number("delta"), m.number("phi_l"))?;
    let picture = m.picture();
    let scenario = match picture {
        Picture::Pt => model.pt_scenario(tol)?,
        Picture::Hermitian => model.hermitian_scenario(tol)?,
    };
    let curve = oscillator_section_loop(&model);
    let center = -C64::i() * model.ratio() * C64::from_polar(1.0, model.phi_l);
    let patch = Patch::disc(vec![center.re, center.im, center.re, center.im], curve.clone());
    Ok(Built {
        scenario,
        section: section_oscillator(s.run.truncation),
        curve,
        patch: Some(patch),
        curve_is_evolution: picture == Picture::Pt,
        exact_alpha: Some(model.gamma_exact(model.tau())),
        area_gamma: (picture == Picture::Pt).then(|| 2.0 * signed_area(&model, 1 << 14)),
        reference_q: Some(reference_qgt()),
        timelike: Some(true),
        random_support: 6.min(s.run.truncation),
    })
}

fn circle_path(center: [f64; 2], radius: f64, rate: f64, tol: &Tolerances) -> Result<ParameterPath> {
    let tau = 2.0 * PI / rate.abs();
    ParameterPath::new(2, tau, move |t| {
        vec![center[0] + radius * (rate * t).cos(), center[1] + radius * (rate * t).sin()]
    })
    .with_velocity(move |t| vec![-radius * rate * (rate * t).sin(), radius * rate * (rate * t).cos()])
    .closed(tol.path.max(1e-12))
}

/// Piecewise-linear closed curve through `points`, reaching point `k` at
/// `knots[k]`; `knots` ends at the duration.
fn closed_polyline(points: Vec<Vec<f64>>, knots: Vec<f64>, tol: &Tolerances) -> Result<ParameterPath> {
    let tau = *knots.last().expect("knots are never empty");
    let (p1, k1) = (points.clone(), knots.clone());
    let segment = |knots: &[f64], t: f64| {
        let k = knots.partition_point(|&x| x <= t).saturating_sub(1);
        k.min(knots.len() - 2)
    };
    let locate = move |t: f64| {
        let k = segment(&k1, t);
        let (a, b) = (&p1[k], &p1[(k + 1) % p1.len()]);
        let s = (t - k1[k]) / (k1[k + 1] - k1[k]);
        a.iter().zip(b).map(|(a, b)| a + s * (b - a)).collect::<Vec<f64>>()
    };
    let velocity = move |t: f64| {
        let k = segment(&knots, t);
        let (a, b) = (&points[k], &points[(k + 1) % points.len()]);
        let dt = knots[k + 1] - knots[k];
        a.iter().zip(b).map(|(a, b)| (b - a) / dt).collect::<Vec<f64>>()
    };
    ParameterPath::new(2, tau, locate)
        .with_velocity(velocity)
        .closed(tol.path.max(1e-12))
}

fn two_level_path(s: &Scenario, tol: &Tolerances) -> Result<(ParameterPath, Option<[f64; 2]>)> {
    match &s.path {
        PathSpec::Circle {
            center,
            radius,
            rate,
            duration,
        } => {
            let c0 = match center {
                Some(c) => [c[0], c[1]],
                None => [s.model.number("s"), s.model.number("g")],
            };
            let rate = rate.unwrap_or_else(|| duration.map_or(1.0, |d| 2.0 * PI / d));
            Ok((circle_path(c0, radius.unwrap_or(0.2), rate, tol)?, Some(c0)))
        }
        PathSpec::Polygon { vertices, duration } => {
            let mut lengths = vec![0.0];
            for k in 0..vertices.len() {
                let (a, b) = (&vertices[k], &vertices[(k + 1) % vertices.len()]);
                let d = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                lengths.push(lengths[k] + d);
            }
            let total = *lengths.last().expect("at least one edge");
            if total == 0.0 {
                return Err(PtqmError::Precondition("polygon has zero perimeter".into()));
            }
            let knots = lengths.iter().map(|l| l / total * duration).collect();
            Ok((closed_polyline(vertices.clone(), knots, tol)?, None))
        }
        PathSpec::Custom { samples, duration } => {
            let n = samples.len();
            let knots = (0..=n).map(|k| duration * k as f64 / n as f64).collect();
            Ok((closed_polyline(samples.clone(), knots, tol)?, None))
        }
        PathSpec::Stationary { .. } => Err(PtqmError::Precondition("two_level needs a loop path".into())),
    }
}

fn two_level_model(s: &Scenario, tol: &Tolerances) -> Result<Built> {
    let (path, center) = two_level_path(s, tol)?;
    for k in 0..256 {
        let p = path.point(path.tau() * k as f64 / 256.0);
        two_level::eigenvectors(p[0], p[1])?;
    }
    let (h, w) = two_level::families();
    let psi0 = cyclic_initial_state(&h, &w, &path, 2 * s.run.steps.max(2000), 0)?;
    let lift = path.clone();
    let lift_v = path.clone();
    let curve = ParameterPath::new(4, path.tau(), move |t| {
        let p = lift.point(t);
        vec![p[0], p[1], 0.0, 0.0]
    })
    .with_velocity(move |t| {
        let v = lift_v.velocity(t, 1e-6);
        vec![v[0], v[1], 0.0, 0.0]
    })
    .closed(tol.path.max(1e-12))?;
    let patch = center.map(|c0| Patch::disc(vec![c0[0], c0[1], 0.0, 0.0], curve.clone()));
    Ok(Built {
        scenario: LoopScenario {
            name: "two_level".into(),
            h,
            w,
            path,
            psi0,
        },
        section: two_level::section(),
        curve,
        patch,
        curve_is_evolution: false,
        exact_alpha: None,
        area_gamma: None,
        reference_q: None,
        timelike: None,
        random_support: 2,
    })
}

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Bloch-sphere chart centred on the axis `m`: `(x, y)` are polar
/// coordinates `rho (cos phi, sin phi)` about `m`, smooth for `rho < pi`.
struct AxisChart {
    u: CMat,
    e1: Vec3,
    e2: Vec3,
    m: Vec3,
}

impl AxisChart {
    fn new(m: Vec3) -> Self {
        let theta = m[2].clamp(-1.0, 1.0).acos();
        let phi = m[1].atan2(m[0]);
        let a = [-phi.sin(), phi.cos(), 0.0];
        let rotate = |v: Vec3| -> Vec3 {
            let (ct, st) = (theta.cos(), theta.sin());
            let axv = cross(a, v);
            let adv = dot(a, v);
            [0, 1, 2].map(|i| v[i] * ct + axv[i] * st + a[i] * adv * (1.0 - ct))
        };
        let [sx, sy, _] = pauli();
        let gen = &sx * c(a[0], 0.0) + &sy * c(a[1], 0.0);
        let u = CMat::identity(2, 2) * c((theta / 2.0).cos(), 0.0) - gen * c(0.0, (theta / 2.0).sin());
        Self {
            u,
            e1: rotate([1.0, 0.0, 0.0]),
            e2: rotate([0.0, 1.0, 0.0]),
            m,
        }
    }

    fn section(&self) -> StateSection {
        let u = self.u.clone();
        StateSection::new(2, MetricFamily::identity(2), 0, move |x: &[f64]| {
            let rho = x[0].hypot(x[1]);
            let half = if rho < 1e-8 { 0.5 } else { (rho / 2.0).sin() / rho };
            &u * CVec::from_vec(vec![c((rho / 2.0).cos(), 0.0), c(x[0], x[1]) * half])
        })
    }

    /// Chart coordinates `(rho, phi)` of a unit Bloch vector.
    fn polar(&self, r: Vec3) -> (f64, f64) {
        (dot(r, self.m).clamp(-1.0, 1.0).acos(), dot(r, self.e2).atan2(dot(r, self.e1)))
    }
}

fn chart_circle(rho: f64, phi0: f64, rate: f64, tau: f64) -> ParameterPath {
    ParameterPath::new(2, tau, move |t| {
        let a = phi0 + rate * t;
        vec![rho * a.cos(), rho * a.sin()]
    })
    .with_velocity(move |t| {
        let a = phi0 + rate * t;
        vec![-rho * rate * a.sin(), rho * rate * a.cos()]
    })
}

fn standard_qm(s: &Scenario, tol: &Tolerances) -> Result<Built> {
    let field = s.model.number("field");
    let h = spin_half_family();
    let w = MetricFamily::identity(2);
    let close = |p: ParameterPath| p.closed(tol.path.max(1e-12));
    match &s.path {
        PathSpec::Stationary { point, duration } => {
            let p = point.clone().unwrap_or_else(|| vec![field, 0.0, 0.0]);
            let strength = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let tau = duration.unwrap_or(2.0 * PI / strength);
            let n = [p[0] / strength, p[1] / strength, p[2] / strength];
            let (m, sign) = if n[2] >= 0.0 { (n, 1.0) } else { (n.map(|v| -v), -1.0) };
            let chart = AxisChart::new(m);
            let (rho, phi0) = chart.polar([0.0, 0.0, 1.0]);
            let psi0 = PhysicalState::new(CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), p.clone());
            let full_turn = ((strength * tau) / (2.0 * PI)).round() * 2.0 * PI;
            let is_loop = (strength * tau - full_turn).abs() < 1e-9 && full_turn > 0.0;
            let curve = chart_circle(rho, phi0, sign * strength, tau);
            let curve = if is_loop { close(curve)? } else { curve };
            Ok(Built {
                scenario: LoopScenario {
                    name: "standard_qm".into(),
                    h,
                    w,
                    path: close(ParameterPath::stationary(p.clone(), tau))?,
                    psi0,
                },
                section: chart.section(),
                patch: is_loop.then(|| Patch::disc(vec![0.0, 0.0], curve.clone())),
                curve,
                curve_is_evolution: is_loop,
                exact_alpha: None,
                area_gamma: None,
                reference_q: None,
                timelike: Some(false),
                random_support: 2,
            })
        }
        PathSpec::Circle {
            radius, rate, duration, ..
        } => {
            let cone = radius.unwrap_or(PI / 3.0);
            let rate = rate.unwrap_or_else(|| duration.map_or(1.0, |d| 2.0 * PI / d));
            let tau = 2.0 * PI / rate.abs();
            let path = close(
                ParameterPath::new(3, tau, move |t| {
                    let a = rate * t;
                    vec![field * cone.sin() * a.cos(), field * cone.sin() * a.sin(), field * cone.cos()]
                })
                .with_velocity(move |t| {
                    let a = rate * t;
                    vec![-field * cone.sin() * rate * a.sin(), field * cone.sin() * rate * a.cos(), 0.0]
                }),
            )?;
            let psi0 = cyclic_initial_state(&h, &w, &path, 2 * s.run.steps.max(2000), 0)?;
            let chart = AxisChart::new([0.0, 0.0, 1.0]);
            let rho = if field > 0.0 { cone } else { PI - cone };
            let phi0 = if field > 0.0 { 0.0 } else { PI };
            let curve = close(chart_circle(rho, phi0, rate, tau))?;
            Ok(Built {
                scenario: LoopScenario {
                    name: "standard_qm".into(),
                    h,
                    w,
                    path,
                    psi0,
                },
                section: chart.section(),
                patch: Some(Patch::disc(vec![0.0, 0.0], curve.clone())),
                curve,
                curve_is_evolution: false,
                exact_alpha: None,
                area_gamma: None,
                reference_q: None,
                timelike: Some(false),
                random_support: 2,
            })
        }
        _ => Err(PtqmError::Precondition("standard_qm needs a circle or stationary path".into())),
    }
}

/// Two random states on the first `support` basis vectors, normalized in
/// the metric at the start of the loop.
pub fn random_pair(seed: u64, built: &Built) -> Result<[PhysicalState; 2]> {
    let mut rng = StdRng::seed_from_u64(seed);
    let dim = built.scenario.w.dim();
    let lambda0 = built.scenario.psi0.lambda.clone();
    let mut draw = || {
        let v = CVec::from_iterator(
            dim,
            (0..dim).map(|k| {
                if k < built.random_support {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                } else {
                    c(0.0, 0.0)
                }
            }),
        );
        PhysicalState::new(v, lambda0.clone()).normalized(&built.scenario.w)
    };
    Ok([draw()?, draw()?])
}
