use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] moran_dim::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad configuration or input, 3 for numerical failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(moran_dim::Error::InvalidInput(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        use moran_dim::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Core(e) => match e {
                E::InvalidInput(_) => "invalid_input",
                E::PrecisionExhausted { .. } => "precision_exhausted",
                E::Divergent { .. } => "divergent",
                E::TailNotCertifiable { .. } => "tail_not_certifiable",
                E::InsufficientDepth(_) => "insufficient_depth",
                E::UnboundedLogBound(_) => "unbounded_log_bound",
                E::NoZero(_) => "no_zero",
                E::EntropyDiverges(_) => "entropy_diverges",
                E::NonConvergent { .. } => "non_convergent",
                E::Overflow { .. } => "overflow",
                E::Infeasible { .. } => "infeasible",
                E::EmptyTree => "empty_tree",
            },
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: ErrorBody {
                kind: self.kind(),
                message: self.to_string(),
                exit_code: self.exit_code(),
            },
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("malformed JSON: {e}"))
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

pub type CliResult<T> = Result<T, CliError>;
