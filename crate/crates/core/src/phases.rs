//! Total, dynamical and geometric phases of a cyclic evolution record.
//!
//! Every route returns a value in `(-pi, pi]`. Derivatives along the record
//! are taken with respect to the sample index, so the geometric routes do
//! not care how the samples are spaced in time.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Serialize, Serializer};

use crate::error::{PtqmError, Result};
use crate::evolution::{detect_cyclic, EvolutionRecord};
use crate::hilbert::{BiDensity, HamiltonianFamily, MetricFamily, PhysicalState};
use crate::linalg::{
    braket, index_derivative_vec, is_uniform, phase_distance, sandwich, simpson, trapezoid, wrap_phase, CMat, CVec,
    C64, I,
};
use crate::tolerances::Tolerances;

pub const ROUTE_GAUGE_SPLIT: &str = "gauge_split";
pub const ROUTE_GAUGE_INVARIANT: &str = "gauge_invariant";
pub const ROUTE_KINEMATIC: &str = "kinematic";
pub const ROUTE_BARGMANN: &str = "kinematic_bargmann";
pub const ROUTE_HOLONOMY: &str = "holonomy";

/// Metric matrices along a record, evaluated once.
struct Sampled<'a> {
    record: &'a EvolutionRecord,
    metrics: Vec<CMat>,
}

impl<'a> Sampled<'a> {
    fn new(record: &'a EvolutionRecord, w: &MetricFamily) -> Self {
        let metrics: Vec<CMat> = if w.is_constant() {
            vec![w.eval(&record.states[0].lambda); record.len()]
        } else {
            record.states.iter().map(|s| w.eval(&s.lambda)).collect()
        };
        Self { record, metrics }
    }

    fn densities(&self) -> Vec<BiDensity> {
        self.record
            .states
            .iter()
            .zip(&self.metrics)
            .map(|(s, m)| BiDensity::from_parts(s.vec.clone(), m * &s.vec, s.lambda.clone()))
            .collect()
    }

    /// Every other sample; the interval count must be even.
    fn halved(&self) -> (Vec<PhysicalState>, Vec<CMat>) {
        let states = self.record.states.iter().step_by(2).cloned().collect();
        let metrics = self.metrics.iter().step_by(2).cloned().collect();
        (states, metrics)
    }

    fn vecs(&self) -> Vec<CVec> {
        self.record.states.iter().map(|s| s.vec.clone()).collect()
    }

    /// Unwrapped total phase: the sum of `arg <<psi_k|psi_{k+1}>>` increments
    /// corrected to land on `arg <<psi_0|psi_N>>`. Also enforces the
    /// resolution requirement.
    fn increments(&self) -> Result<Vec<f64>> {
        let n = self.record.len();
        let mut out = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let mid = (&self.metrics[k] + &self.metrics[k + 1]).scale(0.5);
            let inc = sandwich(&self.record.states[k].vec, &mid, &self.record.states[k + 1].vec).arg();
            if inc.abs() >= FRAC_PI_2 {
                return Err(PtqmError::Resolution {
                    index: k,
                    increment: inc,
                });
            }
            out.push(inc);
        }
        Ok(out)
    }
}

fn require_cyclic(record: &EvolutionRecord, w: &MetricFamily, tol: &Tolerances) -> Result<f64> {
    if record.len() < 5 {
        return Err(PtqmError::Precondition("phase extraction needs at least five samples".into()));
    }
    let report = detect_cyclic(record, w, tol)?;
    if !report.cyclic {
        return Err(PtqmError::Precondition(format!(
            "record is not cyclic: |rho(tau) - rho(0)| = {:e}",
            report.residual
        )));
    }
    Ok(report.alpha)
}

/// `int Im <<phi|d phi/dk>> dk` over the sample index.
fn berry_integral(vecs: &[CVec], metrics: &[CMat]) -> f64 {
    let integrand: Vec<f64> = (0..vecs.len())
        .map(|k| {
            let d = index_derivative_vec(vecs, k);
            sandwich(&vecs[k], &metrics[k], &d).im
        })
        .collect();
    simpson(&integrand, 1.0)
}

fn time_integral(times: &[f64], values: &[f64]) -> f64 {
    if is_uniform(times, 1e-9) {
        simpson(values, times[1] - times[0])
    } else {
        trapezoid(times, values)
    }
}

/// Complex time integral with the same quadrature choice as
/// [`time_integral`].
fn time_integral_c(times: &[f64], values: &[C64]) -> C64 {
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    C64::new(time_integral(times, &re), time_integral(times, &im))
}

/// `beta = -int <<psi|H psi>> dt`.
pub fn dynamical_phase(
    record: &EvolutionRecord,
    h: &HamiltonianFamily,
    w: &MetricFamily,
    tol: &Tolerances,
) -> Result<f64> {
    require_cyclic(record, w, tol)?;
    Ok(dynamical_with(&Sampled::new(record, w), h))
}

fn dynamical_with(s: &Sampled, h: &HamiltonianFamily) -> f64 {
    -time_integral(&s.record.times, &energy_samples(s, h))
}

fn energy_samples(s: &Sampled, h: &HamiltonianFamily) -> Vec<f64> {
    if h.is_zero() {
        return vec![0.0; s.record.len()];
    }
    s.record
        .states
        .iter()
        .zip(&s.metrics)
        .map(|(st, m)| {
            let hv = h.eval(&st.lambda) * &st.vec;
            sandwich(&st.vec, m, &hv).re / sandwich(&st.vec, m, &st.vec).re
        })
        .collect()
}

/// Geometric phase in the auxiliary gauge `phi_a = e^{-i f} psi` with `f`
/// rising linearly in the sample index from 0 to the total phase.
pub fn geometric_phase_gauge_split(record: &EvolutionRecord, w: &MetricFamily, tol: &Tolerances) -> Result<f64> {
    let alpha = require_cyclic(record, w, tol)?;
    let s = Sampled::new(record, w);
    s.increments()?;
    Ok(gauge_split_with(&s, alpha))
}

fn linear_aux(record: &EvolutionRecord, alpha: f64) -> Vec<CVec> {
    let step = alpha / (record.len() - 1) as f64;
    record
        .states
        .iter()
        .enumerate()
        .map(|(k, st)| st.vec.clone() * C64::from_polar(1.0, -step * k as f64))
        .collect()
}

fn gauge_split_with(s: &Sampled, alpha: f64) -> f64 {
    wrap_phase(-berry_integral(&linear_aux(s.record, alpha), &s.metrics))
}

/// `arg <<psi(0)|psi(tau)>> - Im int <<psi|psi'>>` on the raw states.
pub fn geometric_phase_gauge_invariant(record: &EvolutionRecord, w: &MetricFamily, tol: &Tolerances) -> Result<f64> {
    let alpha = require_cyclic(record, w, tol)?;
    let s = Sampled::new(record, w);
    s.increments()?;
    Ok(gauge_invariant_with(&s, alpha))
}

fn gauge_invariant_with(s: &Sampled, alpha: f64) -> f64 {
    wrap_phase(alpha - berry_integral(&s.vecs(), &s.metrics))
}

fn check_closed(densities: &[BiDensity], tol: &Tolerances) -> Result<()> {
    if densities.len() < 3 {
        return Err(PtqmError::Precondition("need at least three densities".into()));
    }
    let (first, last) = (&densities[0], &densities[densities.len() - 1]);
    let mut residual = 0.0f64;
    for i in 0..first.dim() {
        for j in 0..first.dim() {
            let d = last.ket[i] * last.tilde[j].conj() - first.ket[i] * first.tilde[j].conj();
            residual = residual.max(d.norm());
        }
    }
    if residual > tol.cyclic {
        return Err(PtqmError::Precondition(format!(
            "density curve is not closed: |rho_N - rho_0| = {residual:e}"
        )));
    }
    Ok(())
}

/// Ordered product `prod (I + rho_{k+1} - rho_k)` traced against `rho_0`,
/// with the running phase tracked step by step.
fn kinematic_raw(densities: &[BiDensity]) -> Result<f64> {
    let mut v = densities[0].ket.clone();
    let mut prev = braket(&densities[0].tilde, &v).arg();
    let mut total = 0.0;
    for k in 0..densities.len() - 1 {
        let next = densities[k + 1].apply(&v) - densities[k].apply(&v);
        v += next;
        let here = braket(&densities[k + 1].tilde, &v).arg();
        let inc = wrap_phase(here - prev);
        if inc.abs() >= FRAC_PI_2 {
            return Err(PtqmError::Resolution { index: k, increment: inc });
        }
        total += inc;
        prev = here;
    }
    let closing = wrap_phase(braket(&densities[0].tilde, &v).arg() - prev);
    Ok(wrap_phase(total + closing))
}

/// Closed Bargmann product `<phi~_0|phi_1> ... <phi~_{N-1}|phi_0>`; its
/// argument is minus the geometric phase. The last factor is split through
/// `rho_N` so that every tracked increment stays small.
fn bargmann_raw(densities: &[BiDensity]) -> Result<f64> {
    let n = densities.len() - 1;
    let mut total = 0.0;
    for k in 0..n {
        let inc = braket(&densities[k].tilde, &densities[k + 1].ket).arg();
        if inc.abs() >= FRAC_PI_2 {
            return Err(PtqmError::Resolution { index: k, increment: inc });
        }
        total += inc;
    }
    total += braket(&densities[n].tilde, &densities[0].ket).arg();
    Ok(wrap_phase(-total))
}

/// One Richardson level for a second-order discrete phase, using every other
/// sample as the coarse grid. Falls back to the fine value for odd counts.
fn richardson<T: Clone>(samples: &[T], route: impl Fn(&[T]) -> Result<f64>) -> Result<f64> {
    let fine = route(samples)?;
    let intervals = samples.len() - 1;
    if intervals % 2 != 0 || intervals < 8 {
        return Ok(fine);
    }
    let coarse_samples: Vec<T> = samples.iter().step_by(2).cloned().collect();
    let coarse = route(&coarse_samples)?;
    Ok(wrap_phase(fine + wrap_phase(fine - coarse) / 3.0))
}

/// Geometric phase from the time-ordered exponential of `d rho/dt`,
/// discretized as an ordered product.
pub fn geometric_phase_kinematic(densities: &[BiDensity], tol: &Tolerances) -> Result<f64> {
    check_closed(densities, tol)?;
    richardson(densities, kinematic_raw)
}

/// Geometric phase from the closed Bargmann product of overlaps.
pub fn geometric_phase_bargmann(densities: &[BiDensity], tol: &Tolerances) -> Result<f64> {
    check_closed(densities, tol)?;
    richardson(densities, bargmann_raw)
}

/// The parallel-transported gauge: each state is rephased so that its
/// overlap with its predecessor, in the midpoint metric, is real positive.
pub fn parallel_transport_gauge(record: &EvolutionRecord, w: &MetricFamily) -> Result<Vec<PhysicalState>> {
    let s = Sampled::new(record, w);
    transport(&record.states, &s.metrics)
}

fn transport(states: &[PhysicalState], metrics: &[CMat]) -> Result<Vec<PhysicalState>> {
    let mut out: Vec<PhysicalState> = Vec::with_capacity(states.len());
    out.push(states[0].clone());
    for k in 0..states.len() - 1 {
        let mid = (&metrics[k] + &metrics[k + 1]).scale(0.5);
        let next = &states[k + 1];
        let overlap = sandwich(&out[k].vec, &mid, &next.vec);
        if overlap.norm() == 0.0 {
            return Err(PtqmError::Resolution {
                index: k,
                increment: f64::NAN,
            });
        }
        let rephased = next.vec.clone() * C64::from_polar(1.0, -overlap.arg());
        let check = sandwich(&out[k].vec, &mid, &rephased);
        if !(check.re > 0.0 && check.im.abs() <= 1e-12 * check.re.max(1.0)) {
            return Err(PtqmError::Consistency {
                what: "parallel-transport factor".into(),
                residual: check.im.abs(),
                limit: 1e-12,
            });
        }
        out.push(PhysicalState::new(rephased, next.lambda.clone()));
    }
    Ok(out)
}

fn holonomy_raw(states: &[PhysicalState], metrics: &[CMat]) -> Result<f64> {
    let gauge = transport(states, metrics)?;
    Ok(wrap_phase(sandwich(&gauge[0].vec, &metrics[0], &gauge[gauge.len() - 1].vec).arg()))
}

/// Geometric phase as the holonomy of the parallel-transported gauge.
pub fn geometric_phase_holonomy(record: &EvolutionRecord, w: &MetricFamily, tol: &Tolerances) -> Result<f64> {
    require_cyclic(record, w, tol)?;
    let s = Sampled::new(record, w);
    s.increments()?;
    holonomy_with(&s)
}

fn holonomy_with(s: &Sampled) -> Result<f64> {
    let fine = holonomy_raw(&s.record.states, &s.metrics)?;
    let intervals = s.record.len() - 1;
    if intervals % 2 != 0 || intervals < 8 {
        return Ok(fine);
    }
    let (states, metrics) = s.halved();
    let coarse = holonomy_raw(&states, &metrics)?;
    Ok(wrap_phase(fine + wrap_phase(fine - coarse) / 3.0))
}

/// The alternative split `alpha = beta_gw + gamma_gw`, which keeps the
/// gauge-field term with the dynamical part. Both are complex in general.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GwPhases {
    pub gw_beta: C64,
    pub gw_gamma: C64,
    /// `-i int <<psi|K psi>> dt`.
    pub gauge_term: C64,
}

pub fn gw_phases(
    record: &EvolutionRecord,
    h: &HamiltonianFamily,
    w: &MetricFamily,
    tol: &Tolerances,
) -> Result<GwPhases> {
    let alpha = require_cyclic(record, w, tol)?;
    let s = Sampled::new(record, w);
    s.increments()?;
    Ok(gw_with(&s, h, w.is_constant(), alpha))
}

fn gw_with(s: &Sampled, h: &HamiltonianFamily, constant_metric: bool, alpha: f64) -> GwPhases {
    let record = s.record;
    let n = record.len();
    let dim = s.metrics[0].nrows();
    let times = &record.times;

    // <<psi|K psi>> = -1/2 <psi|dW/dt|psi>, with dW/dt along the record.
    let k_expect: Vec<C64> = if constant_metric {
        vec![C64::new(0.0, 0.0); n]
    } else {
        let dtdk: Vec<f64> = (0..n).map(|k| crate::linalg::index_derivative(times, k)).collect();
        (0..n)
            .map(|k| {
                let (idx, wts) = crate::linalg::index_stencil(n, k);
                let mut wdot = CMat::zeros(dim, dim);
                for (&i, c) in idx.iter().zip(wts) {
                    if c != 0.0 {
                        wdot += s.metrics[i].scale(c);
                    }
                }
                wdot /= C64::new(dtdk[k], 0.0);
                let v = &record.states[k].vec;
                sandwich(v, &wdot, v) * -0.5
            })
            .collect()
    };
    let energies = energy_samples(s, h);
    let beta_gw_integrand: Vec<C64> = energies
        .iter()
        .zip(&k_expect)
        .map(|(&e, &kk)| C64::new(e, 0.0) + I * kk)
        .collect();
    let gw_beta = -time_integral_c(times, &beta_gw_integrand);
    let gauge_term = -I * time_integral_c(times, &k_expect);

    // gamma_gw = i int <<phi_a|phi_a'>> dt in the linear auxiliary gauge.
    let aux = linear_aux(record, alpha);
    let integrand: Vec<C64> = (0..n)
        .map(|k| sandwich(&aux[k], &s.metrics[k], &index_derivative_vec(&aux, k)))
        .collect();
    let re: Vec<f64> = integrand.iter().map(|z| z.re).collect();
    let im: Vec<f64> = integrand.iter().map(|z| z.im).collect();
    let gw_gamma = I * C64::new(simpson(&re, 1.0), simpson(&im, 1.0));
    GwPhases {
        gw_beta,
        gw_gamma,
        gauge_term,
    }
}

fn complex_pair<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// A measured residual with its tolerance and verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(residual: f64, tol: f64) -> Self {
        Self {
            residual,
            tol,
            pass: residual <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma_routes: BTreeMap<String, f64>,
    #[serde(serialize_with = "complex_pair")]
    pub gw_beta: C64,
    #[serde(serialize_with = "complex_pair")]
    pub gw_gamma: C64,
    /// `beta_gw / gamma_gw` (real parts), when the geometric part is not
    /// negligible.
    pub eta: Option<f64>,
    pub residuals: BTreeMap<String, Check>,
}

impl PhaseReport {
    pub fn compute(
        record: &EvolutionRecord,
        h: &HamiltonianFamily,
        w: &MetricFamily,
        tol: &Tolerances,
    ) -> Result<Self> {
        let alpha = require_cyclic(record, w, tol)?;
        let s = Sampled::new(record, w);
        s.increments()?;
        let beta = dynamical_with(&s, h);
        let densities = s.densities();
        let mut routes = BTreeMap::new();
        routes.insert(ROUTE_GAUGE_SPLIT.to_string(), gauge_split_with(&s, alpha));
        routes.insert(ROUTE_GAUGE_INVARIANT.to_string(), gauge_invariant_with(&s, alpha));
        routes.insert(ROUTE_KINEMATIC.to_string(), geometric_phase_kinematic(&densities, tol)?);
        routes.insert(ROUTE_BARGMANN.to_string(), geometric_phase_bargmann(&densities, tol)?);
        routes.insert(ROUTE_HOLONOMY.to_string(), holonomy_with(&s)?);
        let gamma = routes[ROUTE_GAUGE_SPLIT];
        let gw = gw_with(&s, h, w.is_constant(), alpha);

        let mut residuals = BTreeMap::new();
        residuals.insert("route_spread".to_string(), Check::new(route_spread(&routes), tol.phase));
        residuals.insert(
            "alpha_beta_gamma".to_string(),
            Check::new(phase_distance(alpha, beta + gamma), tol.phase),
        );
        let gw_sum = gw.gw_beta + gw.gw_gamma;
        residuals.insert(
            "alpha_gw_sum".to_string(),
            Check::new(phase_distance(alpha, gw_sum.re).max(gw_sum.im.abs()), tol.phase),
        );
        residuals.insert(
            "gw_identity".to_string(),
            Check::new(gw_identity_residual(gamma, beta, &gw), tol.phase),
        );
        let eta = (gw.gw_gamma.re.abs() > tol.phase).then(|| gw.gw_beta.re / gw.gw_gamma.re);
        Ok(Self {
            alpha,
            beta,
            gamma,
            gamma_routes: routes,
            gw_beta: gw.gw_beta,
            gw_gamma: gw.gw_gamma,
            eta,
            residuals,
        })
    }

    pub fn all_pass(&self) -> bool {
        self.residuals.values().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        crate::io::to_json_string(self)
    }

    pub fn csv_header() -> String {
        let mut cols = vec!["alpha", "beta", "gamma"];
        cols.extend([
            ROUTE_GAUGE_SPLIT,
            ROUTE_GAUGE_INVARIANT,
            ROUTE_KINEMATIC,
            ROUTE_BARGMANN,
            ROUTE_HOLONOMY,
        ]);
        cols.extend(["gw_beta_re", "gw_beta_im", "gw_gamma_re", "gw_gamma_im", "eta"]);
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut v = vec![self.alpha, self.beta, self.gamma];
        for r in [
            ROUTE_GAUGE_SPLIT,
            ROUTE_GAUGE_INVARIANT,
            ROUTE_KINEMATIC,
            ROUTE_BARGMANN,
            ROUTE_HOLONOMY,
        ] {
            v.push(self.gamma_routes[r]);
        }
        v.extend([
            self.gw_beta.re,
            self.gw_beta.im,
            self.gw_gamma.re,
            self.gw_gamma.im,
            self.eta.unwrap_or(f64::NAN),
        ]);
        crate::io::csv_row(&v)
    }
}

/// Largest pairwise distance on the circle between route values.
pub fn route_spread(routes: &BTreeMap<String, f64>) -> f64 {
    let vals: Vec<f64> = routes.values().copied().collect();
    let mut worst = 0.0f64;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            worst = worst.max(phase_distance(vals[i], vals[j]));
        }
    }
    worst
}

/// Worst violation of `gamma - gamma_gw = beta_gw - beta = -i int <<K>>`.
/// The real parts are compared mod 2pi, the imaginary parts directly.
pub fn gw_identity_residual(gamma: f64, beta: f64, gw: &GwPhases) -> f64 {
    let lhs = C64::new(gamma, 0.0) - gw.gw_gamma;
    let mid = gw.gw_beta - C64::new(beta, 0.0);
    let rhs = gw.gauge_term;
    let dist = |a: C64, b: C64| phase_distance(a.re, b.re).max((a.im - b.im).abs());
    dist(lhs, mid).max(dist(mid, rhs)).max(dist(lhs, rhs))
}
