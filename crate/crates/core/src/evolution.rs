//! Metric-compatible evolution `i d|psi>/dt = [H + iK] |psi>` along a
//! parameter path, with the gauge field `K = -1/2 W^{-1} dW/dt`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PtqmError, Result};
use crate::hilbert::{BiDensity, HamiltonianFamily, MetricFamily, PhysicalState};
use crate::linalg::{braket, max_abs, max_abs_diff, sandwich, simpson, wrap_phase, CMat, CVec, C64, I};
use crate::models::fock::{displacement, exp_raising, tail_mass, FockOps};
use crate::tolerances::Tolerances;

pub type PathFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A curve `t -> lambda_t` over `[0, tau]` in the system-parameter manifold.
#[derive(Clone)]
pub struct ParameterPath {
    dim_params: usize,
    map: PathFn,
    velocity: Option<PathFn>,
    tau: f64,
    closed: bool,
}

impl fmt::Debug for ParameterPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterPath")
            .field("dim_params", &self.dim_params)
            .field("tau", &self.tau)
            .field("closed", &self.closed)
            .field("analytic_velocity", &self.velocity.is_some())
            .finish()
    }
}

impl ParameterPath {
    pub fn new(dim_params: usize, tau: f64, map: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        assert!(tau > 0.0, "path duration must be positive");
        Self {
            dim_params,
            map: Arc::new(map),
            velocity: None,
            tau,
            closed: false,
        }
    }

    /// A path that stays at `point` for the whole interval.
    pub fn stationary(point: Vec<f64>, tau: f64) -> Self {
        let dim = point.len();
        let p = point.clone();
        Self::new(dim, tau, move |_| p.clone())
            .with_velocity(move |_| vec![0.0; dim])
            .assume_closed()
    }

    pub fn with_velocity(mut self, velocity: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.velocity = Some(Arc::new(velocity));
        self
    }

    /// Mark the path closed after checking `|lambda_tau - lambda_0| <= tol`.
    pub fn closed(mut self, tol: f64) -> Result<Self> {
        let gap = dist(&self.point(0.0), &self.point(self.tau));
        if gap > tol {
            return Err(PtqmError::Precondition(format!(
                "path is not closed: |lambda(tau) - lambda(0)| = {gap:e}"
            )));
        }
        self.closed = true;
        Ok(self)
    }

    fn assume_closed(mut self) -> Self {
        self.closed = true;
        self
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn dim_params(&self) -> usize {
        self.dim_params
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        (self.map)(t)
    }

    /// `d lambda / dt`, analytic if supplied, else a central difference with
    /// step `h`.
    pub fn velocity(&self, t: f64, h: f64) -> Vec<f64> {
        if let Some(v) = &self.velocity {
            return v(t);
        }
        let plus = self.point(t + h);
        let minus = self.point(t - h);
        plus.iter()
            .zip(&minus)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Sampled states along an evolution, with the physical norm at each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub states: Vec<PhysicalState>,
    pub norms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RecordJson {
    times: Vec<f64>,
    norms: Vec<f64>,
    states: Vec<Vec<[f64; 2]>>,
    lambdas: Vec<Vec<f64>>,
}

impl EvolutionRecord {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().fold(0.0, |acc, n| acc.max((n - 1.0).abs()))
    }

    /// The bi-density operators along the record.
    pub fn densities(&self, w: &MetricFamily) -> Vec<BiDensity> {
        self.states
            .iter()
            .map(|s| {
                let t = w.eval(&s.lambda) * &s.vec;
                BiDensity::from_parts(s.vec.clone(), t, s.lambda.clone())
            })
            .collect()
    }

    /// Multiply the sample at time `t` by `exp(i theta(t))`.
    pub fn regauged(&self, theta: impl Fn(f64) -> f64) -> Self {
        let states = self
            .states
            .iter()
            .zip(&self.times)
            .map(|(s, &t)| PhysicalState::new(s.vec.clone() * C64::from_polar(1.0, theta(t)), s.lambda.clone()))
            .collect();
        Self {
            times: self.times.clone(),
            states,
            norms: self.norms.clone(),
        }
    }

    /// Every `stride`-th sample, always keeping the last one.
    pub fn subsampled(&self, stride: usize) -> Self {
        assert!(stride >= 1);
        let last = self.len() - 1;
        let mut idx: Vec<usize> = (0..=last).step_by(stride).collect();
        if *idx.last().unwrap() != last {
            idx.push(last);
        }
        Self {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            states: idx.iter().map(|&i| self.states[i].clone()).collect(),
            norms: idx.iter().map(|&i| self.norms[i]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = RecordJson {
            times: self.times.clone(),
            norms: self.norms.clone(),
            states: self
                .states
                .iter()
                .map(|s| s.vec.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            lambdas: self.states.iter().map(|s| s.lambda.clone()).collect(),
        };
        crate::io::to_json_string(&doc)
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let doc: RecordJson = serde_json::from_str(text)?;
        let states = doc
            .states
            .into_iter()
            .zip(doc.lambdas)
            .map(|(v, l)| {
                PhysicalState::new(CVec::from_iterator(v.len(), v.iter().map(|p| C64::new(p[0], p[1]))), l)
            })
            .collect();
        Ok(Self {
            times: doc.times,
            states,
            norms: doc.norms,
        })
    }
}

/// `K = -1/2 W^{-1} dW/dt` at a parameter point moving with `velocity`.
pub fn gauge_field_at(w: &MetricFamily, lambda: &[f64], velocity: &[f64]) -> Result<CMat> {
    let n = w.dim();
    if w.is_constant() || velocity.iter().all(|v| *v == 0.0) {
        return Ok(CMat::zeros(n, n));
    }
    Ok(w.log_time_derivative(lambda, velocity)?.scale(-0.5))
}

/// The gauge field at time `t` along `path`. `fd_step` is used only when the
/// path has no analytic velocity.
pub fn gauge_field(w: &MetricFamily, path: &ParameterPath, t: f64, fd_step: f64) -> Result<CMat> {
    let lambda = path.point(t);
    let v = path.velocity(t, fd_step);
    gauge_field_at(w, &lambda, &v)
}

struct Generator<'a> {
    h: &'a HamiltonianFamily,
    w: &'a MetricFamily,
    path: &'a ParameterPath,
    fd_step: f64,
}

impl Generator<'_> {
    /// `-i H(lambda_t) + K(t)`.
    fn at(&self, t: f64) -> Result<CMat> {
        let lambda = self.path.point(t);
        let mut g = gauge_field(self.w, self.path, t, self.fd_step)?;
        if !self.h.is_zero() {
            g -= self.h.eval(&lambda) * I;
        }
        Ok(g)
    }
}

/// Fixed-step fourth-order Runge-Kutta over `steps` uniform intervals.
pub fn evolve(
    h: &HamiltonianFamily,
    w: &MetricFamily,
    path: &ParameterPath,
    psi0: &PhysicalState,
    steps: usize,
    tol: &Tolerances,
) -> Result<EvolutionRecord> {
    if steps < 2 {
        return Err(PtqmError::Precondition(format!("need at least 2 steps, got {steps}")));
    }
    let tau = path.tau();
    let times: Vec<f64> = (0..=steps).map(|k| tau * k as f64 / steps as f64).collect();
    evolve_on_grid(h, w, path, psi0, &times, tau / steps as f64, tol)
}

/// Integrate through the sample times `times`, splitting each interval into
/// RK4 substeps no longer than `max_dt`. Used for non-uniform records.
pub fn evolve_on_grid(
    h: &HamiltonianFamily,
    w: &MetricFamily,
    path: &ParameterPath,
    psi0: &PhysicalState,
    times: &[f64],
    max_dt: f64,
    tol: &Tolerances,
) -> Result<EvolutionRecord> {
    let dim = w.dim();
    if h.dim() != dim || psi0.vec.len() != dim {
        return Err(PtqmError::Dimension {
            expected: dim,
            got: if h.dim() != dim { h.dim() } else { psi0.vec.len() },
        });
    }
    if times.len() < 2 || times.windows(2).any(|p| p[1] <= p[0]) {
        return Err(PtqmError::Precondition("sample times must be strictly increasing".into()));
    }
    let lambda0 = path.point(times[0]);
    let start = PhysicalState::new(psi0.vec.clone(), lambda0.clone());
    let n0 = start.norm_sq(w);
    if (n0 - 1.0).abs() > tol.norm {
        return Err(PtqmError::NotNormalized { norm: n0 });
    }
    let gen = Generator {
        h,
        w,
        path,
        fd_step: max_dt / 10.0,
    };

    let mut psi = psi0.vec.clone();
    let mut states = vec![start];
    let mut norms = vec![n0];
    let mut g_start = gen.at(times[0])?;
    for pair in times.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        let sub = ((t1 - t0) / max_dt).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / sub as f64;
        for j in 0..sub {
            let t = t0 + j as f64 * dt;
            let g_mid = gen.at(t + 0.5 * dt)?;
            let g_end = gen.at(if j + 1 == sub { t1 } else { t + dt })?;
            let k1 = &g_start * &psi;
            let k2 = &g_mid * (&psi + k1.scale(0.5 * dt));
            let k3 = &g_mid * (&psi + k2.scale(0.5 * dt));
            let k4 = &g_end * (&psi + k3.scale(dt));
            psi += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
            g_start = g_end;
        }
        let lambda = path.point(t1);
        let state = PhysicalState::new(psi.clone(), lambda);
        norms.push(state.norm_sq(w));
        states.push(state);
    }
    let record = EvolutionRecord {
        times: times.to_vec(),
        states,
        norms,
    };
    let drift = record.max_norm_drift();
    let limit = 100.0 * tol.unitarity;
    if drift > limit {
        return Err(PtqmError::Integration { drift, limit });
    }
    Ok(record)
}

/// Propagator `U(tau)` of the full generator over `steps` RK4 steps.
pub fn monodromy(
    h: &HamiltonianFamily,
    w: &MetricFamily,
    path: &ParameterPath,
    steps: usize,
) -> Result<CMat> {
    let dim = w.dim();
    let dt = path.tau() / steps as f64;
    let gen = Generator {
        h,
        w,
        path,
        fd_step: dt / 10.0,
    };
    let mut u = CMat::identity(dim, dim);
    let mut g_start = gen.at(0.0)?;
    for j in 0..steps {
        let t = j as f64 * dt;
        let g_mid = gen.at(t + 0.5 * dt)?;
        let g_end = gen.at(t + dt)?;
        let k1 = &g_start * &u;
        let k2 = &g_mid * (&u + k1.scale(0.5 * dt));
        let k3 = &g_mid * (&u + k2.scale(0.5 * dt));
        let k4 = &g_end * (&u + k3.scale(dt));
        u += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
        g_start = g_end;
    }
    Ok(u)
}

/// A normalized initial state whose evolution around a closed path is
/// cyclic: the `index`-th eigenvector of the monodromy, ordered by
/// eigenphase. The monodromy is unitary in the metric at the base point,
/// so it is diagonalized through the Cholesky factor of that metric.
pub fn cyclic_initial_state(
    h: &HamiltonianFamily,
    w: &MetricFamily,
    path: &ParameterPath,
    steps: usize,
    index: usize,
) -> Result<PhysicalState> {
    if !path.is_closed() {
        return Err(PtqmError::Precondition("cyclic states need a closed path".into()));
    }
    let lambda0 = path.point(0.0);
    let w0 = w.eval(&lambda0);
    let chol = crate::hilbert::cholesky(&w0).ok_or(PtqmError::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
    })?;
    // W0 = L L^dagger; B = L^dagger maps W0-unitaries to unitaries.
    let l = chol.l();
    let b = l.adjoint();
    let b_inv = b
        .clone()
        .try_inverse()
        .ok_or(PtqmError::Singular { condition: f64::INFINITY })?;
    let u = monodromy(h, w, path, steps)?;
    let hat = &b * u * &b_inv;
    let (q, t) = nalgebra::Schur::new(hat).unpack();
    let mut order: Vec<usize> = (0..q.ncols()).collect();
    order.sort_by(|&i, &j| t[(i, i)].arg().total_cmp(&t[(j, j)].arg()));
    let pick = *order
        .get(index)
        .ok_or_else(|| PtqmError::Precondition(format!("eigenvector index {index} out of range")))?;
    let v = &b_inv * q.column(pick);
    PhysicalState::new(v, lambda0).normalized(w)
}

/// Physical-norm distance between the end states obtained with `steps` and
/// `2 * steps`; an estimate of the integration error at `2 * steps`
/// (divide by 15 for RK4).
pub fn step_halving_error(
    h: &HamiltonianFamily,
    w: &MetricFamily,
    path: &ParameterPath,
    psi0: &PhysicalState,
    steps: usize,
    tol: &Tolerances,
) -> Result<f64> {
    let coarse = evolve(h, w, path, psi0, steps, tol)?;
    let fine = evolve(h, w, path, psi0, 2 * steps, tol)?;
    let a = &coarse.states.last().unwrap().vec;
    let b = &fine.states.last().unwrap().vec;
    let lambda = &fine.states.last().unwrap().lambda;
    let d = a - b;
    Ok(sandwich(&d, &w.eval(lambda), &d).re.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CyclicReport {
    pub cyclic: bool,
    /// Total phase `arg <<psi(0)|psi(tau)>>` in `(-pi, pi]`.
    pub alpha: f64,
    /// `max |rho(tau) - rho(0)|`.
    pub residual: f64,
}

/// Cyclicity test on the ray curve; requires the parameters to return.
pub fn detect_cyclic(record: &EvolutionRecord, w: &MetricFamily, tol: &Tolerances) -> Result<CyclicReport> {
    let first = record.states.first().ok_or_else(|| PtqmError::Precondition("empty record".into()))?;
    let last = record.states.last().unwrap();
    if dist(&first.lambda, &last.lambda) > tol.path.max(1e-12) {
        return Err(PtqmError::Precondition(
            "cyclicity needs a closed parameter path".into(),
        ));
    }
    let w0 = w.eval(&first.lambda);
    let w1 = w.eval(&last.lambda);
    let t0 = &w0 * &first.vec;
    let t1 = &w1 * &last.vec;
    let mut residual = 0.0f64;
    for i in 0..first.vec.len() {
        for j in 0..first.vec.len() {
            let d = last.vec[i] * t1[j].conj() - first.vec[i] * t0[j].conj();
            residual = residual.max(d.norm());
        }
    }
    let alpha = wrap_phase(braket(&t0, &last.vec).arg());
    Ok(CyclicReport {
        cyclic: residual <= tol.cyclic,
        alpha,
        residual,
    })
}

/// Propagator of the driven-oscillator PT picture,
/// `e^{i gamma(t)} e^{-2 z(t) a^dagger} D(z(t))`.
///
/// `z` returns `(z1(t), dz1/dt)` with `z1(0) = 0`. The global phase
/// `gamma(t) = int_0^t Im(z1* dz1/ds) ds` is the second Magnus term, fixing
/// the `(0,0)` phase to that of the time-ordered product.
pub fn propagator_oscillator(
    z: &dyn Fn(f64) -> (C64, C64),
    t: f64,
    ops: &FockOps,
    tol: &Tolerances,
) -> Result<CMat> {
    let (zt, _) = z(t);
    let amplitude = 2.0 * zt.norm();
    let tail = tail_mass(amplitude, ops.n);
    if tail > tol.trunc {
        return Err(PtqmError::Truncation {
            tail,
            tol: tol.trunc,
            required: crate::models::fock::required_truncation(amplitude, tol.trunc),
        });
    }
    let phase = magnus_phase(z, t);
    let d = displacement(zt, ops);
    Ok(exp_raising(-2.0 * zt, ops.n) * d * C64::from_polar(1.0, phase))
}

/// `int_0^t Im(z* dz/ds) ds` by composite Simpson on 4096 panels.
pub fn magnus_phase(z: &dyn Fn(f64) -> (C64, C64), t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let n = 4096;
    let h = t / n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|k| {
            let (zz, zd) = z(k as f64 * h);
            (zz.conj() * zd).im
        })
        .collect();
    simpson(&vals, h)
}

/// `max |W K - K^dagger W| / (max|W| max(1, max|K|))` along sampled times of
/// a path: the physical-Hermiticity defect relative to the rounding scale of
/// the product `W K`.
pub fn gauge_field_hermiticity(w: &MetricFamily, path: &ParameterPath, samples: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..=samples {
        let t = path.tau() * k as f64 / samples as f64;
        let kmat = gauge_field(w, path, t, path.tau() * 1e-6)?;
        let wm = w.eval(&path.point(t));
        let scale = max_abs(&wm) * max_abs(&kmat).max(1.0);
        worst = worst.max(max_abs_diff(&(&wm * &kmat), &(kmat.adjoint() * &wm)) / scale);
    }
    Ok(worst)
}
