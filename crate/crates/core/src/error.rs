//! Crate-wide error type.

use std::path::PathBuf;

/// Everything that can go wrong in the lab, from parsing a TSV to running out of budget.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("vocabulary error: {0}")]
    Vocabulary(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("unsupported model for this operation: {0}")]
    UnsupportedModel(String),
    #[error("accounting error: {0}")]
    Accounting(String),
    #[error("privacy budget exhausted at the first iteration; nothing was trained")]
    BudgetExhaustedAtStart,
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code: 2 for configuration problems, 4 when the privacy
    /// budget is gone before the first iteration, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Vocabulary(_) => 2,
            Error::BudgetExhaustedAtStart => 4,
            _ => 3,
        }
    }
}
