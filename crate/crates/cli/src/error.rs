use std::path::PathBuf;

use thiserror::Error;

/// Process exit statuses, one per error category.
pub mod exit {
    pub const VALIDATION_FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DOMAIN: u8 = 3;
    pub const CAPACITY: u8 = 4;
    pub const INSUFFICIENT_DATA: u8 = 5;
    pub const IO: u8 = 6;
    pub const NUMERICAL: u8 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Unknown key, malformed value or missing field in a configuration source.
    #[error("{source_name}{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Config {
        source_name: String,
        line: Option<usize>,
        message: String,
    },

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{failed} of {total} validation checks failed")]
    ValidationFailed { failed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] bbmtail::Error),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            source_name: "configuration".into(),
            line: None,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        use bbmtail::Error as E;
        match self {
            CliError::Config { .. } => exit::USAGE,
            CliError::Read { .. } => exit::IO,
            CliError::ValidationFailed { .. } => exit::VALIDATION_FAILED,
            CliError::Core(e) => match e {
                E::Domain(_) => exit::DOMAIN,
                E::Capacity { .. } => exit::CAPACITY,
                E::InsufficientData { .. } => exit::INSUFFICIENT_DATA,
                E::Numerical(_) => exit::NUMERICAL,
                E::Usage(_) => exit::USAGE,
                E::Io(_) | E::Json(_) => exit::IO,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(bbmtail::Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(bbmtail::Error::Json(e))
    }
}
