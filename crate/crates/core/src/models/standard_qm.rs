//! Spin-1/2 with the ordinary inner product.

use std::f64::consts::PI;

use crate::error::Result;
use crate::evolution::ParameterPath;
use crate::geometry::StateSection;
use crate::hilbert::{HamiltonianFamily, MetricFamily, PhysicalState};
use crate::linalg::{c, CMat, CVec, C64};
use crate::models::LoopScenario;

pub fn pauli() -> [CMat; 3] {
    let (o, one, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    [
        CMat::from_row_slice(2, 2, &[o, one, one, o]),
        CMat::from_row_slice(2, 2, &[o, -i, i, o]),
        CMat::from_row_slice(2, 2, &[one, o, o, -one]),
    ]
}

/// `H(l) = 1/2 l . sigma`.
pub fn spin_half_family() -> HamiltonianFamily {
    let s = pauli();
    HamiltonianFamily::new(2, move |l: &[f64]| (&s[0] * c(l[0], 0.0) + &s[1] * c(l[1], 0.0) + &s[2] * c(l[2], 0.0)).scale(0.5))
}

/// `(cos(th/2), e^{i ph} sin(th/2))` over `(th, ph)`.
pub fn bloch_state(theta: f64, phi: f64) -> CVec {
    CVec::from_vec(vec![c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)])
}

pub fn bloch_section() -> StateSection {
    StateSection::new(2, MetricFamily::identity(2), 0, |x: &[f64]| bloch_state(x[0], x[1]))
}

/// A field of strength `omega` along x rotates `|up>` once around a great
/// circle through the poles in time `2 pi / omega`.
pub fn great_circle_scenario(omega: f64) -> Result<LoopScenario> {
    let tau = 2.0 * PI / omega.abs();
    Ok(LoopScenario {
        name: "standard_qm".into(),
        h: spin_half_family(),
        w: MetricFamily::identity(2),
        path: ParameterPath::stationary(vec![omega, 0.0, 0.0], tau),
        psi0: PhysicalState::new(bloch_state(0.0, 0.0), vec![omega, 0.0, 0.0]),
    })
}

/// The Bloch-sphere coordinates `(th, ph)` traced by the great-circle
/// evolution: the state rotates about x, passing through `th = pi`.
pub fn great_circle_curve(omega: f64) -> ParameterPath {
    let tau = 2.0 * PI / omega.abs();
    // Keep away from the poles, where the chart degenerates: stay on the
    // arc th in (0, pi) with ph = -pi/2.
    ParameterPath::new(2, tau, move |t| vec![0.1 + (PI - 0.2) * t / tau, -PI / 2.0])
}
