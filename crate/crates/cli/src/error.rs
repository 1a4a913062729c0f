use std::path::PathBuf;

use jpeg_compat::Error as CoreError;
use thiserror::Error;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("source exhausted: needed {needed} {what}, found {available}")]
    SourceExhausted {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("failed to write results: {0}")]
    Output(String),

    #[error(transparent)]
    Core(#[from] jpeg_compat::Error),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. }
            | CliError::Malformed { .. }
            | CliError::SourceExhausted { .. }
            | CliError::Output(_) => 2,
            CliError::Core(e) if is_configuration(e) => 1,
            CliError::Core(_) | CliError::Invariant(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Core errors caused by invalid arguments rather than by the data.
fn is_configuration(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::InvalidShape { .. }
            | CoreError::InvalidQuant { .. }
            | CoreError::ZeroBudget
            | CoreError::UnboundedBudget { .. }
            | CoreError::UnsortedBudgets
            | CoreError::InvalidPayload(_)
            | CoreError::TooManyChanges { .. }
    )
}

pub type CliResult<T> = Result<T, CliError>;
