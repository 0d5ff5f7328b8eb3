use std::path::PathBuf;

/// Failure of a CLI run, mapped onto the process exit code by [`CliError::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("invalid {field}: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Model(#[from] nvpulse_core::Error),

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        CliError::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Parse { .. } | CliError::Config { .. } => EXIT_CONFIG,
            CliError::Model(nvpulse_core::Error::InvalidInput { .. }) => EXIT_CONFIG,
            CliError::Model(_) => EXIT_NUMERICAL,
            CliError::Write { .. } => EXIT_IO,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
