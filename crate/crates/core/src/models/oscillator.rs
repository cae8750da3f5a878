//! Driven harmonic oscillator in two equivalent pictures: a PT picture with
//! vanishing Hamiltonian and metric `W(z) = e^{2 z* a} e^{2 z a^dagger}`,
//! and the Hermitian picture obtained through `|psi> -> e^{2 z a^dagger}|psi>`.
//!
//! Parameters: `z1 = l1 + i l2` labels the metric; sections add
//! `z2 = l3 + i l4` for the coherent-state label.

use std::f64::consts::PI;

use crate::error::{PtqmError, Result};
use crate::evolution::ParameterPath;
use crate::geometry::StateSection;
use crate::hilbert::{HamiltonianFamily, MetricFamily, PhysicalState};
use crate::linalg::{c, CMat, CVec, C64, I};
use crate::models::fock::{
    build_fock_ops, coherent_unchecked, conjugated_lowering, exp_lowering, exp_raising, required_truncation, tail_mass, FockOps,
};
use crate::models::LoopScenario;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone)]
pub struct OscillatorModel {
    pub n: usize,
    pub omega_d: f64,
    pub delta: f64,
    pub phi_l: f64,
    pub ops: FockOps,
}

impl OscillatorModel {
    pub fn new(n: usize, omega_d: f64, delta: f64, phi_l: f64) -> Result<Self> {
        if delta == 0.0 || !delta.is_finite() || !omega_d.is_finite() || !phi_l.is_finite() {
            return Err(PtqmError::Precondition(format!(
                "need finite drive and nonzero detuning, got omega_d = {omega_d}, delta = {delta}"
            )));
        }
        Ok(Self {
            n,
            omega_d,
            delta,
            phi_l,
            ops: build_fock_ops(n)?,
        })
    }

    /// `omega_d / delta = 0.3`, `delta = 1`, `phi_l = 0`.
    pub fn default_example(n: usize) -> Result<Self> {
        Self::new(n, 0.3, 1.0, 0.0)
    }

    pub fn tau(&self) -> f64 {
        2.0 * PI / self.delta.abs()
    }

    /// Drive ratio `omega_d / delta`; the loop `z1(t)` is a circle of this
    /// radius.
    pub fn ratio(&self) -> f64 {
        self.omega_d / self.delta
    }

    pub fn z(&self, t: f64) -> C64 {
        I * self.omega_d * (C64::from_polar(1.0, -self.delta * t) - 1.0) * C64::from_polar(1.0, self.phi_l)
            / self.delta
    }

    pub fn z_dot(&self, t: f64) -> C64 {
        self.omega_d * C64::from_polar(1.0, -self.delta * t + self.phi_l)
    }

    /// Closed-form total phase `int_0^t Im(z* z') ds`.
    pub fn gamma_exact(&self, t: f64) -> f64 {
        -self.omega_d * self.omega_d / self.delta * (t - (self.delta * t).sin() / self.delta)
    }

    /// The driven-oscillator Hamiltonian
    /// `i omega_d (a^dagger e^{-i delta t + i phi_l} - a e^{i delta t - i phi_l})`.
    pub fn hamiltonian(&self, t: f64) -> CMat {
        let e = C64::from_polar(1.0, -self.delta * t + self.phi_l);
        (&self.ops.adag * e - &self.ops.a * e.conj()) * (I * self.omega_d)
    }

    /// `B(z) = e^{2 z a^dagger}`, so that `W = B^dagger B`.
    pub fn metric_factor(&self, z: C64) -> CMat {
        exp_raising(2.0 * z, self.n)
    }

    pub fn metric(&self, z: C64) -> CMat {
        let b = self.metric_factor(z);
        b.adjoint() * b
    }

    /// Metric family over `(Re z1, Im z1)`, with analytic gradient and
    /// inverse.
    pub fn metric_family(&self) -> MetricFamily {
        let n = self.n;
        let ops = self.ops.clone();
        let log_ops = self.ops.clone();
        let eval = move |l: &[f64]| {
            let b = exp_raising(2.0 * c(l[0], l[1]), n);
            b.adjoint() * b
        };
        let grad_eval = eval.clone();
        MetricFamily::new(n, eval)
            .with_grad(move |l: &[f64], mu: usize| {
                let w = grad_eval(l);
                let left = &ops.a * &w;
                let right = &w * &ops.adag;
                match mu {
                    0 => (left + right).scale(2.0),
                    _ => (right - left) * (2.0 * I),
                }
            })
            .with_inverse(move |l: &[f64]| {
                let z = c(l[0], l[1]);
                exp_raising(-2.0 * z, n) * exp_lowering(-2.0 * z.conj(), n)
            })
            .with_log_derivative(move |l: &[f64], mu: usize| {
                let m = conjugated_lowering(2.0 * c(l[0], l[1]), &log_ops);
                match mu {
                    0 => (m + &log_ops.adag).scale(2.0),
                    _ => (&log_ops.adag - m) * (2.0 * I),
                }
            })
    }

    /// Error when coherent amplitudes up to `amplitude` do not fit the
    /// truncation within `tol.trunc`.
    pub fn check_trust(&self, amplitude: f64, tol: &Tolerances) -> Result<()> {
        let tail = tail_mass(amplitude, self.n);
        if tail > tol.trunc {
            return Err(PtqmError::Truncation {
                tail,
                tol: tol.trunc,
                required: required_truncation(amplitude, tol.trunc),
            });
        }
        Ok(())
    }

    /// Largest `|z1|` on the loop.
    pub fn loop_radius(&self) -> f64 {
        2.0 * self.ratio().abs()
    }

    /// The PT picture: `H = 0`, metric `W(z1(t))`, starting from the vacuum.
    pub fn pt_scenario(&self, tol: &Tolerances) -> Result<LoopScenario> {
        self.check_trust(3.0 * self.loop_radius(), tol)?;
        let (m1, m2) = (self.clone(), self.clone());
        let path = ParameterPath::new(2, self.tau(), move |t| {
            let z = m1.z(t);
            vec![z.re, z.im]
        })
        .with_velocity(move |t| {
            let v = m2.z_dot(t);
            vec![v.re, v.im]
        })
        .closed(tol.path.max(1e-12))?;
        Ok(LoopScenario {
            name: "oscillator-pt".into(),
            h: HamiltonianFamily::zero(self.n),
            w: self.metric_family(),
            path,
            psi0: self.vacuum(),
        })
    }

    /// The Hermitian picture: `W = I` and `h(l) = i(w a^dagger - w* a)` with
    /// `w = l1 + i l2` driven around `z1'(t)`.
    pub fn hermitian_scenario(&self, tol: &Tolerances) -> Result<LoopScenario> {
        self.check_trust(self.loop_radius(), tol)?;
        let ops = self.ops.clone();
        let h = HamiltonianFamily::new(self.n, move |l: &[f64]| hermitian_picture_hamiltonian(c(l[0], l[1]), &ops));
        let (m1, m2) = (self.clone(), self.clone());
        let path = ParameterPath::new(2, self.tau(), move |t| {
            let v = m1.z_dot(t);
            vec![v.re, v.im]
        })
        .with_velocity(move |t| {
            let a = -I * m2.delta * m2.z_dot(t);
            vec![a.re, a.im]
        })
        .closed(tol.path.max(1e-12))?;
        Ok(LoopScenario {
            name: "oscillator-hermitian".into(),
            h,
            w: MetricFamily::identity(self.n),
            path,
            psi0: self.vacuum(),
        })
    }

    fn vacuum(&self) -> PhysicalState {
        let mut v = CVec::zeros(self.n);
        v[0] = c(1.0, 0.0);
        PhysicalState::new(v, vec![0.0, 0.0])
    }

    /// `|psi> -> e^{2 z1(t) a^dagger} |psi>`. Fails when the image puts
    /// more than `tol.trunc` of its weight on the top Fock level.
    pub fn picture_map(&self, psi: &CVec, t: f64, tol: &Tolerances) -> Result<CVec> {
        let z = self.z(t);
        let mapped = exp_raising(2.0 * z, self.n) * psi;
        let top = mapped[self.n - 1].norm_sqr() / mapped.norm_squared();
        if top > tol.trunc {
            return Err(PtqmError::Truncation {
                tail: top,
                tol: tol.trunc,
                required: required_truncation(2.0 * z.norm() + 1.0, tol.trunc),
            });
        }
        Ok(mapped)
    }

    /// Section `|phi> = e^{-2 z1 a^dagger}|z2>` with tilde partner
    /// `e^{2 z1* a}|z2>` over `(l1, l2, l3, l4)`, with analytic derivatives.
    pub fn section(&self) -> StateSection {
        section_oscillator(self.n)
    }
}

/// `i (w a^dagger - w* a)`.
pub fn hermitian_picture_hamiltonian(w: C64, ops: &FockOps) -> CMat {
    (&ops.adag * w - &ops.a * w.conj()) * I
}

pub fn section_oscillator(n: usize) -> StateSection {
    let ops = build_fock_ops(n.max(2)).expect("truncation of at least 2");
    let metric = {
        let b = move |l: &[f64]| exp_raising(2.0 * c(l[0], l[1]), n);
        MetricFamily::new(n, move |l: &[f64]| {
            let b = b(l);
            b.adjoint() * b
        })
    };
    let phi = move |x: &[f64]| exp_raising(-2.0 * c(x[0], x[1]), n) * coherent_unchecked(c(x[2], x[3]), n);
    let tilde = move |x: &[f64]| exp_lowering(2.0 * c(x[0], -x[1]), n) * coherent_unchecked(c(x[2], x[3]), n);
    let deriv = move |x: &[f64], mu: usize| -> (CVec, CVec) {
        let z2 = coherent_unchecked(c(x[2], x[3]), n);
        let raise = exp_raising(-2.0 * c(x[0], x[1]), n);
        let lower = exp_lowering(2.0 * c(x[0], -x[1]), n);
        let p = &raise * &z2;
        let t = &lower * &z2;
        match mu {
            0 => (&ops.adag * p * c(-2.0, 0.0), &ops.a * t * c(2.0, 0.0)),
            1 => (&ops.adag * p * c(0.0, -2.0), &ops.a * t * c(0.0, -2.0)),
            _ => {
                // d|z>/dRe z = (a^dagger - Re z)|z>, d|z>/dIm z = (i a^dagger - Im z)|z>.
                let dz = if mu == 2 {
                    &ops.adag * &z2 - z2.scale(x[2])
                } else {
                    &ops.adag * &z2 * I - z2.scale(x[3])
                };
                (&raise * &dz, &lower * &dz)
            }
        }
    };
    StateSection::new(4, metric, 2, phi)
        .with_tilde(tilde)
        .with_derivative(deriv)
}

/// The constant geometric tensor of the oscillator section.
pub fn reference_qgt() -> CMat {
    let (o, one, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    CMat::from_row_slice(
        4,
        4,
        &[o, o, -one, -i, o, o, i, -one, -one, -i, one, i, i, -one, -i, one],
    )
}

pub fn reference_curvature() -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(
        4,
        4,
        &[0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0, 1.0, 0.0, -1.0, 0.0],
    )
}

pub fn reference_metric() -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(
        4,
        4,
        &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0],
    )
}

/// `1/2 oint (x dy - y dx)` of the loop `z1(t)` by the shoelace formula on
/// `samples` points.
pub fn signed_area(model: &OscillatorModel, samples: usize) -> f64 {
    let pts: Vec<C64> = (0..samples)
        .map(|k| model.z(model.tau() * k as f64 / samples as f64))
        .collect();
    let mut s = 0.0;
    for k in 0..samples {
        let (p, q) = (pts[k], pts[(k + 1) % samples]);
        s += p.re * q.im - q.re * p.im;
    }
    0.5 * s
}
