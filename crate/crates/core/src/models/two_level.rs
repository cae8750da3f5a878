//! Two-level pseudo-Hermitian model `H = [[i g, s], [s, -i g]]` with metric
//! built from its right eigenvectors, over parameters `(s, g)`.

use std::f64::consts::PI;

use crate::error::{PtqmError, Result};
use crate::evolution::{cyclic_initial_state, ParameterPath};
use crate::geometry::StateSection;
use crate::hilbert::{HamiltonianFamily, MetricFamily};
use crate::linalg::{c, CMat, CVec, C64};
use crate::models::LoopScenario;
use crate::tolerances::Tolerances;

pub fn hamiltonian(s: f64, g: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, g), c(s, 0.0), c(s, 0.0), c(0.0, -g)])
}

/// Unit right eigenvectors for `+E` and `-E`, `E = sqrt(s^2 - g^2)`, with
/// real positive first components.
pub fn eigenvectors(s: f64, g: f64) -> Result<(f64, CMat)> {
    if !(s > g.abs()) {
        return Err(PtqmError::BrokenSymmetry { s, gamma: g });
    }
    let e = (s * s - g * g).sqrt();
    let col = |sign: f64| {
        let v = CVec::from_vec(vec![c(s, 0.0), c(sign * e, -g)]);
        let n = v.norm();
        v.unscale(n)
    };
    let mut v = CMat::zeros(2, 2);
    v.set_column(0, &col(1.0));
    v.set_column(1, &col(-1.0));
    Ok((e, v))
}

/// `W = (V V^dagger)^{-1}`, which makes the eigenvectors orthonormal.
pub fn metric(s: f64, g: f64) -> Result<CMat> {
    let (_, v) = eigenvectors(s, g)?;
    (&v * v.adjoint())
        .try_inverse()
        .ok_or(PtqmError::Singular { condition: f64::INFINITY })
}

/// Constant families at a single point.
pub fn two_level_model(s: f64, g: f64) -> Result<(HamiltonianFamily, MetricFamily)> {
    let w = metric(s, g)?;
    Ok((HamiltonianFamily::constant(hamiltonian(s, g)), MetricFamily::constant(w)))
}

fn nan2() -> CMat {
    CMat::from_element(2, 2, c(f64::NAN, f64::NAN))
}

/// Families over `l = (s, g)`. Outside the unbroken region the metric
/// evaluates to NaN, which every validation rejects.
pub fn families() -> (HamiltonianFamily, MetricFamily) {
    let h = HamiltonianFamily::new(2, |l: &[f64]| hamiltonian(l[0], l[1]));
    let w = MetricFamily::new(2, |l: &[f64]| metric(l[0], l[1]).unwrap_or_else(|_| nan2()));
    (h, w)
}

/// Circle of `radius` around `center` in the `(s, g)` plane, traversed once
/// in time `tau`, started from a cyclic state.
pub fn loop_scenario(center: (f64, f64), radius: f64, tau: f64, tol: &Tolerances) -> Result<LoopScenario> {
    for k in 0..64 {
        let a = 2.0 * PI * k as f64 / 64.0;
        let (s, g) = (center.0 + radius * a.cos(), center.1 + radius * a.sin());
        eigenvectors(s, g)?;
    }
    let (h, w) = families();
    let omega = 2.0 * PI / tau;
    let path = ParameterPath::new(2, tau, move |t| {
        vec![center.0 + radius * (omega * t).cos(), center.1 + radius * (omega * t).sin()]
    })
    .with_velocity(move |t| vec![-radius * omega * (omega * t).sin(), radius * omega * (omega * t).cos()])
    .closed(tol.path.max(1e-12))?;
    let psi0 = cyclic_initial_state(&h, &w, &path, 4000, 0)?;
    Ok(LoopScenario {
        name: "two_level".into(),
        h,
        w,
        path,
        psi0,
    })
}

/// `cos(th/2) v_+ + e^{i ph} sin(th/2) v_-` over `(s, g, th, ph)`; normalized
/// because the eigenvectors are orthonormal in `W`.
pub fn section() -> StateSection {
    let (_, w) = families();
    StateSection::new(4, w, 2, |x: &[f64]| match eigenvectors(x[0], x[1]) {
        Ok((_, v)) => {
            v.column(0) * c((x[2] / 2.0).cos(), 0.0)
                + v.column(1) * C64::from_polar((x[2] / 2.0).sin(), x[3])
        }
        Err(_) => CVec::from_element(2, c(f64::NAN, 0.0)),
    })
}
