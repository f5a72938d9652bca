use std::path::PathBuf;

use mimoloc::Error;

/// Process exit codes.
pub const EXIT_TOLERANCE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Model(e) => match e {
                Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::NonFiniteInput(_)
                | Error::TooFewSensors(_)
                | Error::DelayOutOfRange { .. } => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}
