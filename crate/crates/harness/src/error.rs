use ngo_core::NgoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("reference does not resolve ε = {epsilon}: {reason}")]
    Unresolved { epsilon: f64, reason: String },

    #[error(transparent)]
    Solver(#[from] NgoError),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit status: 2 for bad configuration, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Unresolved { .. } => 3,
            HarnessError::Solver(e) => match e {
                NgoError::InvalidGrid(_) | NgoError::InvalidParameter { .. } | NgoError::Unsupported(_) => 2,
                NgoError::Cfl { .. }
                | NgoError::NonzeroMean { .. }
                | NgoError::Degenerate { .. }
                | NgoError::NonFinite(_) => 3,
            },
            HarnessError::Io { .. } | HarnessError::Csv(_) => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
