use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced to the user, one variant per exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse '{path}': {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("churn script '{path}': {message}")]
    Script { path: PathBuf, message: String },
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Parse { .. } => 3,
            CliError::Parameter(_) => 4,
            CliError::Script { .. } => 5,
            CliError::Consistency(_) => 6,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &std::path::Path, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn script(path: &std::path::Path, message: impl ToString) -> Self {
        CliError::Script {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}
