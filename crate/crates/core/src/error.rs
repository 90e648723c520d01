use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degree too low: need moments up to degree {required}, sequence has {available}")]
    DegreeTooLow { required: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("moment matrix is not positive definite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("solver failed: {status:?} after {iterations} iterations (primal residual {primal_res:e}, dual residual {dual_res:e}, gap {gap:e})")]
    SolverFailure {
        status: crate::solver::SolveStatus,
        iterations: usize,
        primal_res: f64,
        dual_res: f64,
        gap: f64,
        last_iterate: Vec<f64>,
    },

    #[error("atom extraction failed: {0}")]
    ExtractionFailed(String),

    #[error("unsupported measure for this operation: {0}")]
    Unsupported(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid moment file: {0}")]
    InvalidFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegreeTooLow { .. } => "degree-too-low",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NotSymmetric(_) => "not-symmetric",
            Error::NotPositiveDefinite { .. } => "not-positive-definite",
            Error::SolverFailure { .. } => "solver-failure",
            Error::ExtractionFailed(_) => "extraction-failed",
            Error::Unsupported(_) => "unsupported",
            Error::Parse { .. } => "parse",
            Error::InvalidFile(_) => "invalid-file",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code of the command-line tool: 1 for solver failures,
    /// 3 for degree or dimension mismatches, 2 for everything else (input,
    /// parse and I/O problems).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverFailure { .. } => 1,
            Error::DegreeTooLow { .. } | Error::DimensionMismatch { .. } => 3,
            _ => 2,
        }
    }
}
