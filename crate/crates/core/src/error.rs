use thiserror::Error;

/// Errors raised by the transport library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix is not Hermitian (relative deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not skew-Hermitian (relative deviation {0:.3e})")]
    NotSkewHermitian(f64),

    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("trace is {got}, expected {expected}")]
    InvalidTrace { expected: f64, got: f64 },

    #[error("eigen-decomposition did not converge")]
    EigenNonConvergence,

    #[error("function undefined on spectrum (eigenvalue {0:.3e})")]
    OutsideDomain(f64),

    #[error("invalid Lindblad basis: {0}")]
    InvalidBasis(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("positivity lost at step {step} (min eigenvalue {min_eigenvalue:.3e})")]
    PositivityLost { step: usize, min_eigenvalue: f64 },

    #[error("entropy decreased by {decrease:.3e} at step {step}")]
    EntropyDecrease { step: usize, decrease: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("line search failed at iteration {0}")]
    LineSearchFailure(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
