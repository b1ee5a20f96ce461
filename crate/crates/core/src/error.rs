use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("white-noise kernel is a distribution and has no pointwise value")]
    DistributionalKernel,

    #[error("kernel is singular at {0:?}")]
    SingularPoint(Vec<f64>),

    #[error("quadrature did not reach relative tolerance {tol:e} (estimated error {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("discretized spectral density is negative ({0:e}) at a lattice frequency")]
    NonPositiveSpectrum(f64),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("sequences match no regime: {0}")]
    UnclassifiableSequence(String),

    #[error("singular-kernel lattice quadrature is disabled for c = 0")]
    SingularQuadratureDisabled,

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NonPsd(f64),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("objective stalled at a nonpositive value {0:e}; the supremum is dominated by vanishing profiles")]
    NegativeObjectiveStall(f64),

    #[error("negative input value {0:e}")]
    NegativeInput(f64),

    #[error("eigensolver failed: {0}")]
    EigensolveFailure(String),

    #[error("truncation bound {bound:e} exceeds 1% of the solution norm {norm:e}")]
    TruncationDominates { bound: f64, norm: f64 },

    #[error("explicit step dt = {dt:e} exceeds the stability bound {bound:e}")]
    StabilityViolation { dt: f64, bound: f64 },

    #[error("insufficient budget: {0}")]
    InsufficientBudget(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { path: path.into(), message: message.into() }
    }
}
