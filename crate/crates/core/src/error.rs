use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// The variants follow the failure classes the CLI maps onto exit codes:
/// structural and validation problems are input errors, the rest are
/// numerical.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PtqmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("metric is not Hermitian: max |W - W^dagger| = {residual:e}")]
    NotHermitian { residual: f64 },

    #[error("metric is not positive-definite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("metric is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("state is not normalized in the physical inner product: <<psi|psi>> = {norm}")]
    NotNormalized { norm: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid too coarse: phase increment {increment:.3} rad at sample {index} exceeds pi/2")]
    Resolution { index: usize, increment: f64 },

    #[error("integration failed: norm drift {drift:e} exceeds {limit:e}; use smaller steps or a larger truncation")]
    Integration { drift: f64, limit: f64 },

    #[error("truncation too small: tail mass {tail:e} above {tol:e}; need N >= {required}")]
    Truncation { tail: f64, tol: f64, required: usize },

    #[error("numerical consistency failure in {what}: residual {residual:e} exceeds {limit:e}")]
    Consistency {
        what: String,
        residual: f64,
        limit: f64,
    },

    #[error("PT symmetry is broken: s = {s} must exceed gamma = {gamma}")]
    BrokenSymmetry { s: f64, gamma: f64 },
}

pub type Result<T, E = PtqmError> = std::result::Result<T, E>;
