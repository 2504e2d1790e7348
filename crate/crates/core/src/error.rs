use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {n}: {reason}")]
    InvalidDimension { n: usize, reason: &'static str },

    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("basis is not orthonormal (row residual {row_residual:e}, column residual {col_residual:e}, tolerance {tol:e})")]
    NonOrthonormal {
        row_residual: f64,
        col_residual: f64,
        tol: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("operator/EOS mismatch: operator measures {operator}, EOS set computed for {eos}")]
    Inconsistent { operator: usize, eos: usize },

    #[error("path sum needs {required} terms, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("numerical failure: {message}")]
    Numerical { message: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
