//! Connection, curvature, metric and quantum geometric tensor of a
//! W-normalized state section, plus fidelity, line elements and the loop
//! and surface integrals that give the geometric phase.
//!
//! Component convention: `omega[(mu, nu)]` is `Im Q_{mu nu}`, i.e. half the
//! antisymmetrized derivative of the connection. The two-form is
//! `Omega = sum_{mu,nu} omega[(mu, nu)] dl^mu ^ dl^nu`, so a small square of
//! side `h` in the `(mu, nu)` plane picks up `2 omega[(mu, nu)] h^2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PtqmError, Result};
use crate::evolution::ParameterPath;
use crate::hilbert::{BiDensity, MetricFamily, PhysicalState};
use crate::linalg::{braket, hermitian_eigen, hermitian_function, sandwich, simpson, wrap_phase, CMat, CVec, C64};
use crate::tolerances::Tolerances;

pub type SectionFn = Arc<dyn Fn(&[f64]) -> CVec + Send + Sync>;
pub type SectionDerivFn = Arc<dyn Fn(&[f64], usize) -> (CVec, CVec) + Send + Sync>;
pub type RMat = DMatrix<f64>;

/// A smooth choice of state `|phi(lambda)>` over a coordinate chart.
///
/// The metric is evaluated on the first `metric_coords` coordinates; the
/// rest only move the state.
#[derive(Clone)]
pub struct StateSection {
    dim_coords: usize,
    metric_coords: usize,
    eval: SectionFn,
    tilde: Option<SectionFn>,
    derivative: Option<SectionDerivFn>,
    metric: MetricFamily,
    fd_step: f64,
}

impl fmt::Debug for StateSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateSection")
            .field("dim_coords", &self.dim_coords)
            .field("metric_coords", &self.metric_coords)
            .field("hilbert_dim", &self.metric.dim())
            .field("fd_step", &self.fd_step)
            .field("analytic_tilde", &self.tilde.is_some())
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl StateSection {
    pub fn new(
        dim_coords: usize,
        metric: MetricFamily,
        metric_coords: usize,
        eval: impl Fn(&[f64]) -> CVec + Send + Sync + 'static,
    ) -> Self {
        assert!(metric_coords <= dim_coords);
        Self {
            dim_coords,
            metric_coords,
            eval: Arc::new(eval),
            tilde: None,
            derivative: None,
            metric,
            fd_step: 1e-4,
        }
    }

    /// Supply `|phi~(lambda)>` directly instead of forming `W |phi>`.
    pub fn with_tilde(mut self, tilde: impl Fn(&[f64]) -> CVec + Send + Sync + 'static) -> Self {
        self.tilde = Some(Arc::new(tilde));
        self
    }

    /// Supply `(d_mu phi, d_mu phi~)` analytically.
    pub fn with_derivative(
        mut self,
        derivative: impl Fn(&[f64], usize) -> (CVec, CVec) + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        assert!(step > 0.0);
        self.fd_step = step;
        self
    }

    /// Drop any analytic derivative so finite differences are used.
    pub fn numeric(mut self) -> Self {
        self.derivative = None;
        self
    }

    /// The section `e^{i theta(lambda)} |phi(lambda)>`.
    pub fn regauged(&self, theta: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let theta = Arc::new(theta);
        let base = self.clone().numeric();
        let th = theta.clone();
        let eval = base.eval.clone();
        let mut out = StateSection {
            eval: Arc::new(move |x: &[f64]| eval(x) * C64::from_polar(1.0, th(x))),
            ..base.clone()
        };
        let th = theta;
        let b = base;
        out.tilde = Some(Arc::new(move |x: &[f64]| b.tilde_at(x) * C64::from_polar(1.0, th(x))));
        out
    }

    pub fn dim_coords(&self) -> usize {
        self.dim_coords
    }

    pub fn metric(&self) -> &MetricFamily {
        &self.metric
    }

    pub fn system_params<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.metric_coords]
    }

    pub fn phi(&self, x: &[f64]) -> CVec {
        (self.eval)(x)
    }

    pub fn tilde_at(&self, x: &[f64]) -> CVec {
        match &self.tilde {
            Some(t) => t(x),
            None => self.metric.eval(self.system_params(x)) * self.phi(x),
        }
    }

    pub fn state(&self, x: &[f64]) -> PhysicalState {
        PhysicalState::new(self.phi(x), self.system_params(x).to_vec())
    }

    pub fn density(&self, x: &[f64]) -> BiDensity {
        BiDensity::from_parts(self.phi(x), self.tilde_at(x), self.system_params(x).to_vec())
    }

    fn pair(&self, x: &[f64], tol: &Tolerances) -> Result<(CVec, CVec)> {
        let p = self.phi(x);
        let t = self.tilde_at(x);
        let n = braket(&t, &p);
        if (n - C64::new(1.0, 0.0)).norm() > tol.norm {
            return Err(PtqmError::NotNormalized { norm: n.re });
        }
        Ok((p, t))
    }

    fn central(&self, x: &[f64], mu: usize, h: f64, tol: &Tolerances) -> Result<(CVec, CVec)> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[mu] += h;
        xm[mu] -= h;
        let (pp, tp) = self.pair(&xp, tol)?;
        let (pm, tm) = self.pair(&xm, tol)?;
        let s = 0.5 / h;
        Ok(((pp - pm).scale(s), (tp - tm).scale(s)))
    }

    /// `(d_mu phi, d_mu phi~)` at `x`: analytic when available, otherwise a
    /// Richardson-extrapolated central difference.
    pub fn derivative(&self, x: &[f64], mu: usize, tol: &Tolerances) -> Result<(CVec, CVec)> {
        if let Some(d) = &self.derivative {
            return Ok(d(x, mu));
        }
        let h = self.fd_step;
        let (p1, t1) = self.central(x, mu, h, tol)?;
        let (p2, t2) = self.central(x, mu, 0.5 * h, tol)?;
        Ok(((p2.scale(4.0) - p1).unscale(3.0), (t2.scale(4.0) - t1).unscale(3.0)))
    }

    /// Largest gap between the extrapolated derivative and a plain one-sided
    /// difference, divided by the step. Large values flag a non-smooth
    /// section.
    pub fn smoothness_probe(&self, x: &[f64], tol: &Tolerances) -> Result<f64> {
        let h = self.fd_step;
        let (p0, _) = self.pair(x, tol)?;
        let mut worst = 0.0f64;
        for mu in 0..self.dim_coords {
            let (d, _) = self.derivative(x, mu, tol)?;
            let mut xp = x.to_vec();
            xp[mu] += h;
            let (pp, _) = self.pair(&xp, tol)?;
            let one_sided = (pp - &p0).unscale(h);
            worst = worst.max((one_sided - d).norm() / h);
        }
        Ok(worst)
    }
}

/// Section values and first derivatives at one point.
struct Jet {
    phi: CVec,
    tilde: CVec,
    d_phi: Vec<CVec>,
    d_tilde: Vec<CVec>,
}

impl Jet {
    fn at(section: &StateSection, x: &[f64], tol: &Tolerances) -> Result<Self> {
        if x.len() != section.dim_coords {
            return Err(PtqmError::Dimension {
                expected: section.dim_coords,
                got: x.len(),
            });
        }
        let (phi, tilde) = section.pair(x, tol)?;
        let mut d_phi = Vec::with_capacity(x.len());
        let mut d_tilde = Vec::with_capacity(x.len());
        for mu in 0..x.len() {
            let (p, t) = section.derivative(x, mu, tol)?;
            d_phi.push(p);
            d_tilde.push(t);
        }
        Ok(Self {
            phi,
            tilde,
            d_phi,
            d_tilde,
        })
    }

    fn connection(&self) -> Vec<f64> {
        self.d_phi.iter().map(|d| braket(&self.tilde, d).im).collect()
    }

    /// `1/2 Im(<d_mu phi~|d_nu phi> + <d_mu phi|d_nu phi~>)`.
    fn curvature(&self) -> RMat {
        let m = self.d_phi.len();
        let raw = RMat::from_fn(m, m, |mu, nu| {
            0.5 * (braket(&self.d_tilde[mu], &self.d_phi[nu]) + braket(&self.d_phi[mu], &self.d_tilde[nu])).im
        });
        (&raw - raw.transpose()).scale(0.5)
    }

    fn qgt(&self) -> CMat {
        let m = self.d_phi.len();
        let tp: Vec<C64> = self.d_phi.iter().map(|d| braket(&self.tilde, d)).collect();
        let pt: Vec<C64> = self.d_tilde.iter().map(|d| braket(&self.phi, d)).collect();
        CMat::from_fn(m, m, |mu, nu| {
            let a = braket(&self.d_tilde[mu], &self.d_phi[nu]) - braket(&self.d_tilde[mu], &self.phi) * tp[nu];
            let b = braket(&self.d_phi[mu], &self.d_tilde[nu]) - braket(&self.d_phi[mu], &self.tilde) * pt[nu];
            (a + b) * 0.5
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricTensors {
    pub point: Vec<f64>,
    pub a: Vec<f64>,
    #[serde(serialize_with = "ser_rmat")]
    pub omega: RMat,
    #[serde(serialize_with = "ser_rmat")]
    pub g: RMat,
    #[serde(serialize_with = "ser_cmat")]
    pub q: CMat,
    /// `g` has an eigenvalue within `tol_tensor` of zero.
    pub degenerate: bool,
}

fn ser_rmat<S: serde::Serializer>(m: &RMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    rows.serialize(s)
}

fn ser_cmat<S: serde::Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect();
    rows.serialize(s)
}

impl GeometricTensors {
    /// `max |Im Q - omega|`, `max |Re Q - g|` and `max |Q - Q^dagger|`.
    pub fn consistency(&self) -> (f64, f64, f64) {
        let m = self.q.nrows();
        let mut im = 0.0f64;
        let mut re = 0.0f64;
        let mut herm = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                im = im.max((self.q[(i, j)].im - self.omega[(i, j)]).abs());
                re = re.max((self.q[(i, j)].re - self.g[(i, j)]).abs());
                herm = herm.max((self.q[(i, j)] - self.q[(j, i)].conj()).norm());
            }
        }
        (im, re, herm)
    }

    pub fn metric_eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.g.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn line_element(&self, d: &[f64]) -> f64 {
        quadratic_form(&self.g, d)
    }

    pub fn csv_header(dim: usize) -> String {
        let mut cols: Vec<String> = (1..=dim).map(|i| format!("l{i}")).collect();
        cols.extend((1..=dim).map(|i| format!("A{i}")));
        for name in ["Omega", "g", "ReQ", "ImQ"] {
            for i in 1..=dim {
                for j in 1..=dim {
                    cols.push(format!("{name}{i}{j}"));
                }
            }
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let m = self.point.len();
        let mut v = self.point.clone();
        v.extend(&self.a);
        for i in 0..m {
            for j in 0..m {
                v.push(self.omega[(i, j)]);
            }
        }
        for i in 0..m {
            for j in 0..m {
                v.push(self.g[(i, j)]);
            }
        }
        for part in [0, 1] {
            for i in 0..m {
                for j in 0..m {
                    let z = self.q[(i, j)];
                    v.push(if part == 0 { z.re } else { z.im });
                }
            }
        }
        crate::io::csv_row(&v)
    }
}

fn quadratic_form(g: &RMat, d: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            s += g[(i, j)] * d[i] * d[j];
        }
    }
    s
}

/// All tensors at `x` from a single set of section samples.
pub fn geometric_tensors(section: &StateSection, x: &[f64], tol: &Tolerances) -> Result<GeometricTensors> {
    let jet = Jet::at(section, x, tol)?;
    let q = jet.qgt();
    let omega = jet.curvature();
    let re = q.map(|z| z.re);
    let g = (&re + re.transpose()).scale(0.5);
    let degenerate = SymmetricEigen::new(g.clone())
        .eigenvalues
        .iter()
        .any(|e| e.abs() <= tol.tensor);
    Ok(GeometricTensors {
        point: x.to_vec(),
        a: jet.connection(),
        omega,
        g,
        q,
        degenerate,
    })
}

pub fn connection(section: &StateSection, x: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
    Ok(Jet::at(section, x, tol)?.connection())
}

pub fn curvature(section: &StateSection, x: &[f64], tol: &Tolerances) -> Result<RMat> {
    Ok(Jet::at(section, x, tol)?.curvature())
}

pub fn metric_tensor(section: &StateSection, x: &[f64], tol: &Tolerances) -> Result<RMat> {
    Ok(geometric_tensors(section, x, tol)?.g)
}

pub fn qgt(section: &StateSection, x: &[f64], tol: &Tolerances) -> Result<CMat> {
    Ok(Jet::at(section, x, tol)?.qgt())
}

/// `1/2 (d_mu A_nu - d_nu A_mu)` by differentiating the connection with a
/// Richardson-extrapolated central difference of step `h`.
pub fn curvature_from_connection(section: &StateSection, x: &[f64], h: f64, tol: &Tolerances) -> Result<RMat> {
    let m = x.len();
    let grad_a = |mu: usize, step: f64| -> Result<Vec<f64>> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[mu] += step;
        xm[mu] -= step;
        let ap = connection(section, &xp, tol)?;
        let am = connection(section, &xm, tol)?;
        Ok(ap.iter().zip(&am).map(|(p, q)| (p - q) / (2.0 * step)).collect())
    };
    let mut d = RMat::zeros(m, m);
    for mu in 0..m {
        let coarse = grad_a(mu, h)?;
        let fine = grad_a(mu, 0.5 * h)?;
        for nu in 0..m {
            d[(mu, nu)] = (4.0 * fine[nu] - coarse[nu]) / 3.0;
        }
    }
    Ok((&d - d.transpose()).scale(0.5))
}

pub fn line_element(section: &StateSection, x: &[f64], d: &[f64], tol: &Tolerances) -> Result<f64> {
    Ok(quadratic_form(&metric_tensor(section, x, tol)?, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionClass {
    Spacelike,
    Lightlike,
    Timelike,
}

impl EvolutionClass {
    pub fn of(ds2: f64, speed_sq: f64, tol_light: f64) -> Self {
        if ds2.abs() <= tol_light * speed_sq {
            Self::Lightlike
        } else if ds2 > 0.0 {
            Self::Spacelike
        } else {
            Self::Timelike
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifiedSample {
    pub t: f64,
    /// `g(v, v)` for the curve velocity `v`.
    pub ds2: f64,
    pub class: EvolutionClass,
}

/// Sign of `ds^2` along `samples + 1` equally spaced points of a coordinate
/// curve.
pub fn classify_evolution(
    section: &StateSection,
    curve: &ParameterPath,
    samples: usize,
    tol: &Tolerances,
) -> Result<Vec<ClassifiedSample>> {
    let h = curve.tau() / (samples.max(1) as f64 * 100.0);
    (0..=samples)
        .into_par_iter()
        .map(|k| {
            let t = curve.tau() * k as f64 / samples.max(1) as f64;
            let x = curve.point(t);
            let v = curve.velocity(t, h);
            let speed_sq: f64 = v.iter().map(|c| c * c).sum();
            let ds2 = if speed_sq == 0.0 {
                0.0
            } else {
                line_element(section, &x, &v, tol)?
            };
            Ok(ClassifiedSample {
                t,
                ds2,
                class: EvolutionClass::of(ds2, speed_sq, tol.light),
            })
        })
        .collect()
}

/// `max_k |Im <<phi_k|phi_{k+1} - phi_k>>| / dt_k`, with the metric taken at
/// the midpoint of each step.
pub fn parallel_transport_residual(states: &[PhysicalState], times: &[f64], w: &MetricFamily) -> f64 {
    let mut worst = 0.0f64;
    let mut w_prev = w.eval(&states[0].lambda);
    for k in 0..states.len().saturating_sub(1) {
        let w_next = w.eval(&states[k + 1].lambda);
        let mid = (&w_prev + &w_next).scale(0.5);
        let step = &states[k + 1].vec - &states[k].vec;
        let r = sandwich(&states[k].vec, &mid, &step).im / (times[k + 1] - times[k]);
        worst = worst.max(r.abs());
        w_prev = w_next;
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fidelity {
    pub value: f64,
    pub operator_route: f64,
    pub overlap_route: f64,
    pub discrepancy: f64,
}

/// Fidelity between two bi-densities; `rho` fixes the metric used for
/// adjoints.
///
/// The operator route moves both operators into the `W^{1/2}` picture of
/// `rho`'s metric, where `rho` is an ordinary projector, and evaluates
/// `tr |rho^{1/2} sigma rho^{1/2}|^{1/2}` there. The overlap route is
/// `|<phi~'|phi> <phi~|phi'>|^{1/2}`.
pub fn fidelity(rho: &BiDensity, sigma: &BiDensity, w: &MetricFamily, tol: &Tolerances) -> Result<Fidelity> {
    if rho.dim() != sigma.dim() || rho.dim() != w.dim() {
        return Err(PtqmError::Dimension {
            expected: rho.dim(),
            got: if rho.dim() != sigma.dim() { sigma.dim() } else { w.dim() },
        });
    }
    let wm = w.eval(&rho.lambda);
    let (evals, vecs) = hermitian_eigen(&wm);
    if evals[0] <= 0.0 {
        return Err(PtqmError::NotPositiveDefinite {
            min_eigenvalue: evals[0],
        });
    }
    let half = |p: f64| {
        let d = CVec::from_iterator(evals.len(), evals.iter().map(|e| C64::new(e.powf(p), 0.0)));
        &vecs * CMat::from_diagonal(&d) * vecs.adjoint()
    };
    let (w_half, w_mhalf) = (half(0.5), half(-0.5));
    let rho_hat = (&w_half * &rho.ket) * (&w_mhalf * &rho.tilde).adjoint();
    let sigma_hat = (&w_half * &sigma.ket) * (&w_mhalf * &sigma.tilde).adjoint();
    let rho_herm = (&rho_hat + rho_hat.adjoint()).scale(0.5);
    let root = hermitian_function(&rho_herm, |x| C64::new(x.max(0.0).sqrt(), 0.0));
    let m = &root * sigma_hat * &root;
    let operator_route: f64 = m.singular_values().iter().map(|s| s.max(0.0).sqrt()).sum();

    let overlap_route = (braket(&sigma.tilde, &rho.ket) * braket(&rho.tilde, &sigma.ket)).norm().sqrt();
    let discrepancy = (operator_route - overlap_route).abs();
    let limit = 100.0 * tol.fid;
    if discrepancy > limit {
        return Err(PtqmError::Consistency {
            what: "fidelity routes".into(),
            residual: discrepancy,
            limit,
        });
    }
    Ok(Fidelity {
        value: overlap_route.clamp(0.0, 1.0),
        operator_route,
        overlap_route,
        discrepancy,
    })
}

/// `2 (1 - F) - g(d, d)` between `x` and `x + d` on a section.
pub fn fidelity_metric_defect(section: &StateSection, x: &[f64], d: &[f64], tol: &Tolerances) -> Result<f64> {
    let shifted: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
    let f = fidelity(&section.density(x), &section.density(&shifted), section.metric(), tol)?;
    let g = metric_tensor(section, x, tol)?;
    Ok(2.0 * (1.0 - f.overlap_route) - quadratic_form(&g, d))
}

/// `-oint A` around a closed coordinate loop, mod 2pi. The periodic
/// trapezoid rule is used since the integrand is smooth and periodic.
pub fn loop_integral_connection(
    section: &StateSection,
    curve: &ParameterPath,
    samples: usize,
    tol: &Tolerances,
) -> Result<f64> {
    Ok(wrap_phase(-loop_integral_unwrapped(section, curve, samples, tol)?))
}

/// `oint A` without reduction.
pub fn loop_integral_unwrapped(
    section: &StateSection,
    curve: &ParameterPath,
    samples: usize,
    tol: &Tolerances,
) -> Result<f64> {
    if !curve.is_closed() {
        return Err(PtqmError::Precondition("loop integral needs a closed curve".into()));
    }
    if samples < 3 {
        return Err(PtqmError::Precondition("need at least three loop samples".into()));
    }
    let dt = curve.tau() / samples as f64;
    let fd = dt / 100.0;
    let terms: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * dt;
            let a = connection(section, &curve.point(t), tol)?;
            let v = curve.velocity(t, fd);
            Ok(a.iter().zip(&v).map(|(a, v)| a * v).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum::<f64>() * dt)
}

/// `oint A` around a closed polygon, Simpson on each straight edge with
/// `per_edge` (even) intervals.
pub fn polygon_loop_integral(
    section: &StateSection,
    vertices: &[Vec<f64>],
    per_edge: usize,
    tol: &Tolerances,
) -> Result<f64> {
    if vertices.len() < 3 {
        return Err(PtqmError::Precondition("a polygon needs at least three vertices".into()));
    }
    let per_edge = per_edge.max(2) + per_edge % 2;
    let mut total = 0.0;
    for k in 0..vertices.len() {
        let (p, q) = (&vertices[k], &vertices[(k + 1) % vertices.len()]);
        let edge: Vec<f64> = q.iter().zip(p).map(|(b, a)| b - a).collect();
        let vals = (0..=per_edge)
            .into_par_iter()
            .map(|j| {
                let s = j as f64 / per_edge as f64;
                let x: Vec<f64> = p.iter().zip(&edge).map(|(a, e)| a + s * e).collect();
                let a = connection(section, &x, tol)?;
                Ok(a.iter().zip(&edge).map(|(a, e)| a * e).sum::<f64>())
            })
            .collect::<Result<Vec<f64>>>()?;
        total += simpson(&vals, 1.0 / per_edge as f64);
    }
    Ok(total)
}

/// Square of side `h` with one corner at `x`, spanning the `(mu, nu)`
/// plane counterclockwise.
pub fn square_loop(x: &[f64], plane: (usize, usize), h: f64) -> Vec<Vec<f64>> {
    let (mu, nu) = plane;
    let shift = |dm: f64, dn: f64| {
        let mut p = x.to_vec();
        p[mu] += dm;
        p[nu] += dn;
        p
    };
    vec![shift(0.0, 0.0), shift(h, 0.0), shift(h, h), shift(0.0, h)]
}

pub type PatchFn = Arc<dyn Fn(f64, f64) -> Vec<f64> + Send + Sync>;

/// `x(u, v)` for `(u, v)` in the unit square.
#[derive(Clone)]
pub struct Patch {
    map: PatchFn,
}

impl fmt::Debug for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Patch")
    }
}

impl Patch {
    pub fn new(map: impl Fn(f64, f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { map: Arc::new(map) }
    }

    /// The cone `center + u (loop(v tau) - center)` over a closed curve.
    pub fn disc(center: Vec<f64>, boundary: ParameterPath) -> Self {
        let tau = boundary.tau();
        Self::new(move |u, v| {
            let b = boundary.point(v * tau);
            center.iter().zip(&b).map(|(c, b)| c + u * (b - c)).collect()
        })
    }

    pub fn point(&self, u: f64, v: f64) -> Vec<f64> {
        (self.map)(u, v)
    }

    fn tangents(&self, u: f64, v: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
        let diff = |a: Vec<f64>, b: Vec<f64>, s: f64| a.iter().zip(&b).map(|(p, q)| (p - q) / s).collect();
        let (u0, u1) = ((u - h).max(0.0), (u + h).min(1.0));
        let (v0, v1) = ((v - h).max(0.0), (v + h).min(1.0));
        let xu = diff(self.point(u1, v), self.point(u0, v), u1 - u0);
        let xv = diff(self.point(u, v1), self.point(u, v0), v1 - v0);
        (xu, xv)
    }
}

/// `-int_S Omega` over a patch, mod 2pi, with composite Simpson in both
/// directions on an `nu x nv` grid of intervals.
pub fn surface_integral_curvature(
    section: &StateSection,
    patch: &Patch,
    nu: usize,
    nv: usize,
    tol: &Tolerances,
) -> Result<f64> {
    Ok(wrap_phase(-surface_integral_unwrapped(section, patch, nu, nv, tol)?))
}

pub fn surface_integral_unwrapped(
    section: &StateSection,
    patch: &Patch,
    nu: usize,
    nv: usize,
    tol: &Tolerances,
) -> Result<f64> {
    if nu < 2 || nv < 2 {
        return Err(PtqmError::Precondition("surface grid needs at least 2x2 intervals".into()));
    }
    let h = 1e-5;
    let rows: Vec<Vec<f64>> = (0..=nu)
        .into_par_iter()
        .map(|i| {
            let u = i as f64 / nu as f64;
            (0..=nv)
                .map(|j| {
                    let v = j as f64 / nv as f64;
                    let (xu, xv) = patch.tangents(u, v, h);
                    if xu.iter().all(|c| *c == 0.0) || xv.iter().all(|c| *c == 0.0) {
                        return Ok(0.0);
                    }
                    let om = curvature(section, &patch.point(u, v), tol)?;
                    let mut s = 0.0;
                    for a in 0..xu.len() {
                        for b in 0..xv.len() {
                            s += 2.0 * om[(a, b)] * xu[a] * xv[b];
                        }
                    }
                    Ok(s)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let inner: Vec<f64> = rows.iter().map(|r| simpson(r, 1.0 / nv as f64)).collect();
    Ok(simpson(&inner, 1.0 / nu as f64))
}

/// Tensors at many points, computed in parallel.
pub fn tensor_field(section: &StateSection, points: &[Vec<f64>], tol: &Tolerances) -> Vec<Result<GeometricTensors>> {
    points.par_iter().map(|x| geometric_tensors(section, x, tol)).collect()
}

pub fn tensor_field_csv(fields: &[GeometricTensors]) -> String {
    let Some(first) = fields.first() else {
        return String::new();
    };
    let mut out = GeometricTensors::csv_header(first.point.len());
    out.push('\n');
    for f in fields {
        out.push_str(&f.csv_row());
        out.push('\n');
    }
    out
}

/// `(l_mu, l_nu, Omega_{mu nu})` over a rectangular grid in the `(mu, nu)`
/// plane through `base`.
pub fn curvature_plot_csv(
    section: &StateSection,
    base: &[f64],
    plane: (usize, usize),
    ranges: ((f64, f64), (f64, f64)),
    counts: (usize, usize),
    tol: &Tolerances,
) -> Result<String> {
    let (mu, nu) = plane;
    let ((a0, a1), (b0, b1)) = ranges;
    let (na, nb) = counts;
    let lin = |lo: f64, hi: f64, n: usize, i: usize| {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let rows: Vec<String> = (0..na * nb)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nb, k % nb);
            let mut x = base.to_vec();
            x[mu] = lin(a0, a1, na, i);
            x[nu] = lin(b0, b1, nb, j);
            let om = curvature(section, &x, tol)?;
            Ok(crate::io::csv_row(&[x[mu], x[nu], om[(mu, nu)]]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = format!("l{},l{},Omega{}{}\n", mu + 1, nu + 1, mu + 1, nu + 1);
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}
