//! The parameter-dependent physical Hilbert space: metric operators, the
//! physical inner product `<<a|b>>_lambda = <a|W(lambda)|b>`, associated
//! (tilde) states and rank-one bi-density operators.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use log::{debug, warn};
use nalgebra::Cholesky;
use serde::Serialize;

use crate::error::{PtqmError, Result};
use crate::linalg::{braket, hermitian_eigen, max_abs, max_abs_diff, sandwich, CMat, CVec, C64};
use crate::tolerances::Tolerances;

pub type MatrixFn = Arc<dyn Fn(&[f64]) -> CMat + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], usize) -> CMat + Send + Sync>;

/// A smooth family `lambda -> W(lambda)` of positive-definite metrics.
///
/// Callbacks must be pure. When no analytic gradient is supplied, partial
/// derivatives use central differences with step
/// `fd_step * max(1, |lambda_mu|)`. An analytic inverse, or the logarithmic
/// derivative `W^{-1} dW/dlambda_mu` itself, may be attached for families
/// whose condition number makes a numerical solve lossy.
#[derive(Clone)]
pub struct MetricFamily {
    dim: usize,
    eval: MatrixFn,
    grad: Option<GradFn>,
    inverse: Option<MatrixFn>,
    log_derivative: Option<GradFn>,
    fd_step: f64,
    constant: bool,
}

impl fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricFamily")
            .field("dim", &self.dim)
            .field("analytic_grad", &self.grad.is_some())
            .field("analytic_inverse", &self.inverse.is_some())
            .field("analytic_log_derivative", &self.log_derivative.is_some())
            .field("fd_step", &self.fd_step)
            .field("constant", &self.constant)
            .finish()
    }
}

impl MetricFamily {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> CMat + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
            grad: None,
            inverse: None,
            log_derivative: None,
            fd_step: 1e-5,
            constant: false,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(CMat::identity(dim, dim))
    }

    pub fn constant(w: CMat) -> Self {
        let dim = w.nrows();
        let inv = w.clone().try_inverse();
        let mut fam = Self::new(dim, move |_| w.clone());
        fam.grad = Some(Arc::new(move |_, _| CMat::zeros(dim, dim)));
        if let Some(inv) = inv {
            fam.inverse = Some(Arc::new(move |_| inv.clone()));
        }
        fam.constant = true;
        fam
    }

    pub fn with_grad(mut self, grad: impl Fn(&[f64], usize) -> CMat + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_inverse(mut self, inverse: impl Fn(&[f64]) -> CMat + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    pub fn with_log_derivative(mut self, f: impl Fn(&[f64], usize) -> CMat + Send + Sync + 'static) -> Self {
        self.log_derivative = Some(Arc::new(f));
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        assert!(step > 0.0, "fd_step must be positive");
        self.fd_step = step;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn eval(&self, lambda: &[f64]) -> CMat {
        (self.eval)(lambda)
    }

    /// `d W / d lambda_mu`.
    pub fn partial(&self, lambda: &[f64], mu: usize) -> CMat {
        if let Some(grad) = &self.grad {
            return grad(lambda, mu);
        }
        let h = self.fd_step * lambda[mu].abs().max(1.0);
        let mut plus = lambda.to_vec();
        let mut minus = lambda.to_vec();
        plus[mu] += h;
        minus[mu] -= h;
        (self.eval(&plus) - self.eval(&minus)).scale(0.5 / h)
    }

    /// `dW/dt = sum_mu lambda_dot_mu dW/dlambda_mu` along a path.
    pub fn time_derivative(&self, lambda: &[f64], velocity: &[f64]) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        if self.constant {
            return out;
        }
        for (mu, &v) in velocity.iter().enumerate() {
            if v != 0.0 {
                out += self.partial(lambda, mu).scale(v);
            }
        }
        out
    }

    /// `W^{-1} dW/dt` along a path.
    pub fn log_time_derivative(&self, lambda: &[f64], velocity: &[f64]) -> Result<CMat> {
        let mut out = CMat::zeros(self.dim, self.dim);
        if self.constant {
            return Ok(out);
        }
        if let Some(ld) = &self.log_derivative {
            for (mu, &v) in velocity.iter().enumerate() {
                if v != 0.0 {
                    out += ld(lambda, mu).scale(v);
                }
            }
            return Ok(out);
        }
        Ok(self.inverse(lambda)? * self.time_derivative(lambda, velocity))
    }

    /// `W(lambda)^{-1}`, analytic when available and otherwise through a
    /// Cholesky factorization.
    pub fn inverse(&self, lambda: &[f64]) -> Result<CMat> {
        if let Some(inv) = &self.inverse {
            return Ok(inv(lambda));
        }
        let w = self.eval(lambda);
        match cholesky(&w) {
            Some(ch) => Ok(ch.inverse()),
            None => Err(PtqmError::Singular {
                condition: condition_number(&w),
            }),
        }
    }

    /// Hermiticity and positive-definiteness of `W(lambda)`; logs a warning
    /// when the condition number exceeds `tol.cond_warn`.
    pub fn validate(&self, lambda: &[f64], tol: &Tolerances) -> Result<()> {
        validate_metric(&self.eval(lambda), tol)
    }
}

/// Cholesky factorization that also rejects non-positive pivots (the complex
/// factorization would otherwise take square roots of negative numbers).
pub fn cholesky(w: &CMat) -> Option<Cholesky<C64, nalgebra::Dyn>> {
    let ch = Cholesky::new(w.clone())?;
    let l = ch.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(ch)
}

pub fn condition_number(w: &CMat) -> f64 {
    let (values, _) = hermitian_eigen(w);
    let lo = values.first().copied().unwrap_or(0.0);
    let hi = values.last().copied().unwrap_or(0.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

static COND_WARNED: AtomicBool = AtomicBool::new(false);

pub fn validate_metric(w: &CMat, tol: &Tolerances) -> Result<()> {
    let residual = max_abs_diff(w, &w.adjoint());
    if residual > tol.herm {
        return Err(PtqmError::NotHermitian { residual });
    }
    if cholesky(w).is_none() {
        let (values, _) = hermitian_eigen(w);
        return Err(PtqmError::NotPositiveDefinite {
            min_eigenvalue: values[0],
        });
    }
    let cond = condition_number(w);
    if cond > tol.cond_warn {
        if COND_WARNED.swap(true, Ordering::Relaxed) {
            debug!("metric condition number {cond:.3e} exceeds {:.1e}", tol.cond_warn);
        } else {
            warn!(
                "metric condition number {cond:.3e} exceeds {:.1e}; further reports at debug level",
                tol.cond_warn
            );
        }
    }
    Ok(())
}

/// A smooth family `lambda -> H(lambda)`, expected (not assumed) to be
/// pseudo-Hermitian with respect to the matching metric family.
#[derive(Clone)]
pub struct HamiltonianFamily {
    dim: usize,
    eval: MatrixFn,
    zero: bool,
}

impl fmt::Debug for HamiltonianFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianFamily")
            .field("dim", &self.dim)
            .field("zero", &self.zero)
            .finish()
    }
}

impl HamiltonianFamily {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> CMat + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
            zero: false,
        }
    }

    pub fn zero(dim: usize) -> Self {
        let mut h = Self::new(dim, move |_| CMat::zeros(dim, dim));
        h.zero = true;
        h
    }

    pub fn constant(h: CMat) -> Self {
        Self::new(h.nrows(), move |_| h.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn eval(&self, lambda: &[f64]) -> CMat {
        (self.eval)(lambda)
    }
}

/// A state vector attached to the parameter point whose metric defines its
/// norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    pub vec: CVec,
    pub lambda: Vec<f64>,
}

impl PhysicalState {
    pub fn new(vec: CVec, lambda: Vec<f64>) -> Self {
        Self { vec, lambda }
    }

    /// `<<psi|psi>>_lambda`, real part (the imaginary part vanishes for a
    /// Hermitian metric).
    pub fn norm_sq(&self, w: &MetricFamily) -> f64 {
        sandwich(&self.vec, &w.eval(&self.lambda), &self.vec).re
    }

    /// Rescale to unit physical norm.
    pub fn normalized(mut self, w: &MetricFamily) -> Result<Self> {
        let n = self.norm_sq(w);
        if !(n > 0.0) || !n.is_finite() {
            return Err(PtqmError::NotNormalized { norm: n });
        }
        self.vec.unscale_mut(n.sqrt());
        Ok(self)
    }

    pub fn is_normalized(&self, w: &MetricFamily, tol: &Tolerances) -> bool {
        (self.norm_sq(w) - 1.0).abs() <= tol.norm
    }
}

/// `<<a|b>> = a^dagger W b`, after checking dimensions and validating `W`.
pub fn physical_inner(w: &CMat, a: &CVec, b: &CVec) -> Result<C64> {
    let n = w.nrows();
    for got in [w.ncols(), a.len(), b.len()] {
        if got != n {
            return Err(PtqmError::Dimension { expected: n, got });
        }
    }
    validate_metric(w, &Tolerances::default())?;
    Ok(sandwich(a, w, b))
}

/// The associated state `W(lambda) |psi>`.
pub fn tilde(state: &PhysicalState, w: &MetricFamily) -> CVec {
    w.eval(&state.lambda) * &state.vec
}

/// The rank-one operator `rho = |psi><psi~|`, kept in factored form.
///
/// Overall phases of the ket cancel between the two factors, so the operator
/// is a function of the ray only.
#[derive(Debug, Clone, PartialEq)]
pub struct BiDensity {
    pub ket: CVec,
    pub tilde: CVec,
    pub lambda: Vec<f64>,
}

impl BiDensity {
    pub fn from_parts(ket: CVec, tilde: CVec, lambda: Vec<f64>) -> Self {
        Self { ket, tilde, lambda }
    }

    pub fn dim(&self) -> usize {
        self.ket.len()
    }

    pub fn matrix(&self) -> CMat {
        &self.ket * self.tilde.adjoint()
    }

    /// `rho |v>` without forming the matrix.
    pub fn apply(&self, v: &CVec) -> CVec {
        self.ket.scale(1.0) * braket(&self.tilde, v)
    }

    pub fn trace(&self) -> C64 {
        braket(&self.tilde, &self.ket)
    }

    pub fn idempotence_residual(&self) -> f64 {
        let m = self.matrix();
        max_abs_diff(&(&m * &m), &m)
    }

    /// Ratio of the second to the first singular value.
    pub fn rank_ratio(&self) -> f64 {
        let sv = self.matrix().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        if s.len() < 2 || s[0] == 0.0 {
            return 0.0;
        }
        s[1] / s[0]
    }

    pub fn check(&self, tol: &Tolerances) -> Result<()> {
        let idem = self.idempotence_residual();
        if idem > tol.idem {
            return Err(PtqmError::Consistency {
                what: "bi-density idempotence".into(),
                residual: idem,
                limit: tol.idem,
            });
        }
        let tr = (self.trace() - 1.0).norm();
        if tr > tol.trace {
            return Err(PtqmError::Consistency {
                what: "bi-density trace".into(),
                residual: tr,
                limit: tol.trace,
            });
        }
        let rank = self.rank_ratio();
        if rank > tol.rank {
            return Err(PtqmError::Consistency {
                what: "bi-density rank".into(),
                residual: rank,
                limit: tol.rank,
            });
        }
        Ok(())
    }
}

/// `rho = |psi><psi~|` for a normalized state.
pub fn bi_density(state: &PhysicalState, w: &MetricFamily, tol: &Tolerances) -> Result<BiDensity> {
    let wm = w.eval(&state.lambda);
    let t = &wm * &state.vec;
    let norm = braket(&state.vec, &t).re;
    if (norm - 1.0).abs() > tol.norm {
        return Err(PtqmError::NotNormalized { norm });
    }
    Ok(BiDensity::from_parts(state.vec.clone(), t, state.lambda.clone()))
}

/// `max |W X - X^dagger W|`: zero iff `X` is Hermitian in the physical inner
/// product.
pub fn pseudo_hermiticity_residual(w: &CMat, x: &CMat) -> f64 {
    max_abs(&(w * x - x.adjoint() * w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudoHermiticityReport {
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn check_pseudo_hermitian(
    h: &HamiltonianFamily,
    w: &MetricFamily,
    lambda: &[f64],
    tol: f64,
) -> PseudoHermiticityReport {
    let residual = pseudo_hermiticity_residual(&w.eval(lambda), &h.eval(lambda));
    PseudoHermiticityReport {
        residual,
        tol,
        pass: residual <= tol,
    }
}
