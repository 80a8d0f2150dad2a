use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid subsystem specification: {0}")]
    InvalidSubsystems(String),

    #[error("domain error in {op}: eigenvalue {eigenvalue:.3e} below -tolerance")]
    Domain { op: &'static str, eigenvalue: f64 },

    #[error("capacity exceeded: requested dimension {requested} exceeds limit {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("support violation: supp(rho) is not contained in supp(sigma) (leaked mass {leak:.3e})")]
    Support { leak: f64 },

    #[error("input is not permutation invariant (residual {residual:.3e})")]
    NotPermutationInvariant { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
