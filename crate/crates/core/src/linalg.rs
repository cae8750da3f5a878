//! Dense complex linear algebra and quadrature helpers shared by the modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `<a|b>` with the conjugate on the left argument.
pub fn braket(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

/// `<a|M|b>`.
pub fn sandwich(a: &CVec, m: &CMat, b: &CVec) -> C64 {
    a.dotc(&(m * b))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `f(M)` for Hermitian `M`, through its spectral decomposition.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let diag = CVec::from_iterator(values.len(), values.iter().map(|&x| f(x)));
    &vectors * CMat::from_diagonal(&diag) * vectors.adjoint()
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn unitary_exp(h: &CMat, t: f64) -> CMat {
    hermitian_function(h, |e| C64::from_polar(1.0, -e * t))
}

/// Reduce an angle to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Distance between two angles on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Composite Simpson rule with unit spacing `h`; falls back to a 3/8 panel
/// at the end when the number of intervals is odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals % 2 == 0 {
                (intervals, 0.0)
            } else {
                let k = intervals - 3;
                let t = 3.0 * h / 8.0
                    * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
                (k, t)
            };
            if even_end == 0 {
                return tail;
            }
            let mut s = values[0] + values[even_end];
            for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            h / 3.0 * s + tail
        }
    }
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// True when the grid spacing is uniform to relative precision `rel`.
pub fn is_uniform(times: &[f64], rel: f64) -> bool {
    if times.len() < 3 {
        return true;
    }
    let h0 = times[1] - times[0];
    times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h0).abs() <= rel * h0.abs())
}

/// Fourth-order finite-difference stencil for the derivative with respect to
/// the sample index, one-sided at the two ends. Weights are already divided
/// by 12.
pub fn index_stencil(n: usize, k: usize) -> ([usize; 5], [f64; 5]) {
    assert!(n >= 5, "index derivatives need at least five samples");
    let (idx, w) = if k == 0 {
        ([0, 1, 2, 3, 4], [-25.0, 48.0, -36.0, 16.0, -3.0])
    } else if k == 1 {
        ([0, 1, 2, 3, 4], [-3.0, -10.0, 18.0, -6.0, 1.0])
    } else if k == n - 1 {
        ([n - 1, n - 2, n - 3, n - 4, n - 5], [25.0, -48.0, 36.0, -16.0, 3.0])
    } else if k == n - 2 {
        ([n - 1, n - 2, n - 3, n - 4, n - 5], [3.0, 10.0, -18.0, 6.0, -1.0])
    } else {
        ([k - 2, k - 1, k + 1, k + 2, k], [1.0, -8.0, 8.0, -1.0, 0.0])
    };
    (idx, w.map(|x| x / 12.0))
}

pub fn index_derivative(samples: &[f64], k: usize) -> f64 {
    let (idx, w) = index_stencil(samples.len(), k);
    idx.iter().zip(w).map(|(&i, w)| samples[i] * w).sum()
}

pub fn index_derivative_vec(samples: &[CVec], k: usize) -> CVec {
    let (idx, w) = index_stencil(samples.len(), k);
    let mut acc = CVec::zeros(samples[k].len());
    for (&i, w) in idx.iter().zip(w) {
        if w != 0.0 {
            acc.axpy(C64::new(w, 0.0), &samples[i], C64::new(1.0, 0.0));
        }
    }
    acc
}
