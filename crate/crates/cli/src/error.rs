use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stale input: {0}")]
    Stale(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Core(#[from] eocsa_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 config, 3 stale input, 4 numeric, 5 data.
    pub fn exit_code(&self) -> i32 {
        use eocsa_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Stale(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io { .. } => 5,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => 2,
                E::Numeric(_) => 4,
                _ => 5,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
