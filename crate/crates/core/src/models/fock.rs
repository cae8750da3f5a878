//! Truncated bosonic Fock space: ladder operators, coherent states and the
//! exponentials the oscillator model needs.

use crate::error::{PtqmError, Result};
use crate::linalg::{c, unitary_exp, CMat, CVec, C64, I};

/// `a`, `a^dagger` and `a^dagger a` on the span of `|0>..|N-1>`.
#[derive(Debug, Clone)]
pub struct FockOps {
    pub n: usize,
    pub a: CMat,
    pub adag: CMat,
    pub number: CMat,
}

pub fn build_fock_ops(n: usize) -> Result<FockOps> {
    if n < 2 {
        return Err(PtqmError::Precondition(format!(
            "Fock truncation must be at least 2, got {n}"
        )));
    }
    let mut a = CMat::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = c((k as f64).sqrt(), 0.0);
    }
    let adag = a.adjoint();
    let number = &adag * &a;
    Ok(FockOps { n, a, adag, number })
}

/// `exp(coef * a^dagger)` on the truncation.
///
/// `a^dagger` is nilpotent there, so the power series terminates after `N`
/// terms; the entries below are that finite sum written out,
/// `<m|e^{c a^dagger}|k> = c^{m-k}/(m-k)! * sqrt(m!/k!)` for `m >= k`.
pub fn exp_raising(coef: C64, n: usize) -> CMat {
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        let mut entry = c(1.0, 0.0);
        out[(k, k)] = entry;
        for m in (k + 1)..n {
            entry = entry * coef * ((m as f64).sqrt() / (m - k) as f64);
            out[(m, k)] = entry;
        }
    }
    out
}

/// `exp(coef * a)`; the transpose of [`exp_raising`] since `a` is real.
pub fn exp_lowering(coef: C64, n: usize) -> CMat {
    exp_raising(coef, n).transpose()
}

/// `e^{-coef a^dagger} a e^{coef a^dagger}` on the truncation: `a + coef`
/// plus a correction confined to the top row, where the truncated
/// commutator differs from the identity.
pub fn conjugated_lowering(coef: C64, ops: &FockOps) -> CMat {
    let n = ops.n;
    let mut out = &ops.a + CMat::identity(n, n) * coef;
    let mut r = coef;
    for k in 1..=n {
        out[(n - 1, n - k)] -= r * n as f64;
        if k < n {
            r = r * coef * ((n - k) as f64).sqrt() / (k + 1) as f64;
        }
    }
    out
}

/// Plain Taylor series `sum_{k<=terms} X^k / k!`.
pub fn exp_series(x: &CMat, terms: usize) -> CMat {
    let n = x.nrows();
    let mut out = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=terms {
        term = (&term * x).unscale(k as f64);
        out += &term;
    }
    out
}

/// `D(z) = exp(z a^dagger - z* a)`, exponentiating the truncated
/// anti-Hermitian generator exactly (the result is unitary on the truncation).
pub fn displacement(z: C64, ops: &FockOps) -> CMat {
    let gen = (&ops.adag * z - &ops.a * z.conj()) * I;
    unitary_exp(&gen, 1.0)
}

/// Coherent-state population beyond the cutoff,
/// `sum_{k>=N} e^{-|z|^2} |z|^{2k}/k!`.
pub fn tail_mass(amplitude: f64, n: usize) -> f64 {
    let x = amplitude * amplitude;
    if x == 0.0 {
        return 0.0;
    }
    // log of the first omitted term, then sum the rapidly decaying series.
    let mut log_term = -x;
    for k in 1..=n {
        log_term += x.ln() - (k as f64).ln();
    }
    let mut term = log_term.exp();
    let mut total = 0.0;
    let mut k = n;
    while term > 0.0 && (term > 1e-300) && k < n + 10_000 {
        total += term;
        k += 1;
        term *= x / k as f64;
        if term < total * 1e-18 {
            break;
        }
    }
    total
}

/// Smallest cutoff whose coherent tail at `amplitude` is at most `tol`.
pub fn required_truncation(amplitude: f64, tol: f64) -> usize {
    (2..).find(|&n| tail_mass(amplitude, n) <= tol).unwrap_or(usize::MAX)
}

/// Normalized Fock-series coherent state `|z>`.
pub fn coherent_state(z: C64, n: usize, tol_trunc: f64) -> Result<CVec> {
    let tail = tail_mass(z.norm(), n);
    if tail > tol_trunc {
        return Err(PtqmError::Truncation {
            tail,
            tol: tol_trunc,
            required: required_truncation(z.norm(), tol_trunc),
        });
    }
    Ok(coherent_unchecked(z, n))
}

pub(crate) fn coherent_unchecked(z: C64, n: usize) -> CVec {
    let mut v = CVec::zeros(n);
    let mut amp = c((-0.5 * z.norm_sqr()).exp(), 0.0);
    v[0] = amp;
    for k in 1..n {
        amp = amp * z / (k as f64).sqrt();
        v[k] = amp;
    }
    let norm = v.norm();
    v.unscale(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{braket, max_abs_diff};

    #[test]
    fn small_truncations() {
        let ops = build_fock_ops(2).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(ops.a, expect);
        let ops = build_fock_ops(3).unwrap();
        for k in 0..3 {
            assert!((ops.number[(k, k)] - c(k as f64, 0.0)).norm() < 1e-15);
        }
        assert!(build_fock_ops(1).is_err());
    }

    #[test]
    fn commutator_defect_sits_in_the_corner() {
        let n = 7;
        let ops = build_fock_ops(n).unwrap();
        let comm = &ops.a * &ops.adag - &ops.adag * &ops.a;
        let mut expect = CMat::identity(n, n);
        expect[(n - 1, n - 1)] = c(1.0 - n as f64, 0.0);
        assert!(max_abs_diff(&comm, &expect) < 1e-12);
    }

    #[test]
    fn closed_form_exponential_matches_series() {
        let n = 12;
        let ops = build_fock_ops(n).unwrap();
        let z = c(0.4, -0.7);
        let series = exp_series(&(&ops.adag * z), n);
        assert!(max_abs_diff(&exp_raising(z, n), &series) < 1e-12);
        let series = exp_series(&(&ops.a * z), n);
        assert!(max_abs_diff(&exp_lowering(z, n), &series) < 1e-12);
        let inv = exp_raising(-z, n);
        assert!(max_abs_diff(&(exp_raising(z, n) * inv), &CMat::identity(n, n)) < 1e-12);
    }

    #[test]
    fn coherent_state_oracles() {
        let n = 40;
        let tol = 1e-12;
        let vac = coherent_state(c(0.0, 0.0), n, tol).unwrap();
        assert_eq!(vac[0], c(1.0, 0.0));
        let (z, w) = (c(0.3, -0.4), c(-0.5, 0.2));
        let zv = coherent_state(z, n, tol).unwrap();
        let wv = coherent_state(w, n, tol).unwrap();
        let expect = (-(z.norm_sqr() + w.norm_sqr()) / 2.0 + z.conj() * w).exp();
        assert!((braket(&zv, &wv) - expect).norm() < 1e-10);

        let ops = build_fock_ops(n).unwrap();
        let displaced = displacement(z, &ops) * &vac;
        assert!((displaced - zv).norm() < 1e-10);
    }

    #[test]
    fn coherent_state_truncation_error() {
        match coherent_state(c(3.0, 0.0), 10, 1e-12) {
            Err(PtqmError::Truncation { required, .. }) => {
                assert!(required > 10);
                assert!(tail_mass(3.0, required) <= 1e-12);
                assert!(tail_mass(3.0, required - 1) > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conjugated_lowering_matches_the_product() {
        let n = 12;
        let ops = build_fock_ops(n).unwrap();
        let z = c(0.3, -0.2);
        let direct = exp_raising(-z, n) * &ops.a * exp_raising(z, n);
        assert!(max_abs_diff(&conjugated_lowering(z, &ops), &direct) < 1e-12);
    }

    #[test]
    fn displacement_is_unitary() {
        let ops = build_fock_ops(30).unwrap();
        let d = displacement(c(0.5, 0.3), &ops);
        assert!(max_abs_diff(&(d.adjoint() * &d), &CMat::identity(30, 30)) < 1e-12);
    }
}
