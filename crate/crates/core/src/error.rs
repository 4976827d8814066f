use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("negative eigenvalue {value:e} (tolerance {tol:e})")]
    NotPositive { value: f64, tol: f64 },
    #[error("no convergence after {iterations} iterations, residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("rank deficient: unresolved directions {directions:?}")]
    RankDeficient { directions: Vec<String> },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. } | Error::RankDeficient { .. } | Error::Numerical(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Dimension { .. } => "dimension",
            Error::NotPositive { .. } => "not_positive",
            Error::NoConvergence { .. } => "no_convergence",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
