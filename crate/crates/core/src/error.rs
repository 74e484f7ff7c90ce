use thiserror::Error;

/// Errors raised by the numerical routines and the instance/IO layer.
#[derive(Debug, Error)]
pub enum SsfError {
    #[error("matrix is not Hermitian: entry ({row}, {col}) differs from its conjugate transpose by {deviation:e}")]
    NotHermitian { row: usize, col: usize, deviation: f64 },

    #[error("{matrix} is not Hermitian: entry ({row}, {col}) differs from the conjugate of ({col}, {row}) by {deviation:e}")]
    NotHermitianInput { matrix: String, row: usize, col: usize, deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("function evaluation failed: {0}")]
    FunctionEvaluation(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate kernel: all {0} nodes coincide, use an atom")]
    DegenerateKernel(usize),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SsfError>;

impl SsfError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SsfError::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag used in the CLI's stderr JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            SsfError::NotHermitian { .. } | SsfError::NotHermitianInput { .. } => "not_hermitian",
            SsfError::DimensionMismatch { .. } => "dimension_mismatch",
            SsfError::InvalidArgument(_) => "invalid_argument",
            SsfError::Eigensolver(_) => "eigensolver",
            SsfError::FunctionEvaluation(_) => "function_evaluation",
            SsfError::Unsupported(_) => "unsupported",
            SsfError::DegenerateKernel(_) => "degenerate_kernel",
            SsfError::Consistency(_) => "consistency",
            SsfError::Parse { .. } => "parse",
            SsfError::Validation(_) => "validation",
            SsfError::Io(_) => "io",
        }
    }
}
