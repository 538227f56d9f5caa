use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config field `{path}`: {reason}")]
    Field { path: String, reason: String },

    #[error(transparent)]
    Core(#[from] stefan_core::Error),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("blow-up: {0}")]
    Blowup(String),
}

impl CliError {
    /// 1 for usage and config errors, 2 for a blow-up under `fail_on_blowup`, 3 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Parse(_) | Self::Field { .. } => 1,
            Self::Core(stefan_core::Error::InvalidParameter { .. } | stefan_core::Error::Expression { .. }) => 1,
            Self::Blowup(_) => 2,
            Self::Core(_) | Self::Io { .. } => 3,
        }
    }
}
