use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error("cannot read config `{path}`: {source}")]
    ConfigIo { path: PathBuf, source: io::Error },

    #[error("cannot load ensemble `{path}`: {source}")]
    Load { path: PathBuf, source: polaron_core::Error },

    #[error("cannot save ensemble `{path}`: {source}")]
    Save { path: PathBuf, source: polaron_core::Error },

    #[error(transparent)]
    Core(#[from] polaron_core::Error),

    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),

    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for usage and configuration problems, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        use polaron_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::ConfigIo { .. } => 2,
            CliError::Core(E::InvalidParameter { .. } | E::AlphaMismatch { .. }) => 2,
            CliError::Load {
                source: E::AlphaMismatch { .. },
                ..
            } => 2,
            _ => 1,
        }
    }
}
