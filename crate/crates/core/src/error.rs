use thiserror::Error;

/// Errors produced anywhere in the workbench.
///
/// The variants are grouped by the exit-code class the command-line front end
/// maps them to: malformed input, infeasible parameters, and numeric failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("ring degree {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("coefficient {value} exceeds the supported magnitude 2^62")]
    CoefficientOverflow { value: i128 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariance matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("parameters infeasible: {0}")]
    Infeasible(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("empty accumulator: no accepted ratio samples for cell ({row}, {col})")]
    EmptyAccumulator { row: usize, col: usize },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for this error class: 2 input, 3 infeasible, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPositiveDefinite(_) | Error::Infeasible(_) => 3,
            Error::Numeric(_) | Error::EmptyAccumulator { .. } => 4,
            _ => 2,
        }
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}
