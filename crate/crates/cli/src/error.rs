use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or unknown arguments.
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] slelab::Error),

    /// Well-formed arguments that violate an experiment's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// A plot or report input is well-formed on disk but unusable.
    #[error("{0}")]
    Input(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DOMAIN: u8 = 3;
    pub const BUDGET: u8 = 4;
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(slelab::Error::BudgetExhausted { .. }) => exit::BUDGET,
            CliError::Core(_) | CliError::Precondition(_) => exit::DOMAIN,
            CliError::Io { .. }
            | CliError::Csv { .. }
            | CliError::Json { .. }
            | CliError::Input(_) => exit::FAILURE,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Precondition error unless `cond` holds.
pub(crate) fn require(cond: bool, message: impl FnOnce() -> String) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Precondition(message()))
    }
}
