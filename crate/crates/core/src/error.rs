use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
///
/// The variants are grouped so that callers (the CLI in particular) can map
/// them to coarse failure classes: bad input data, shape or argument misuse,
/// and numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{file}, row {row}: {message}")]
    Row {
        file: String,
        row: usize,
        message: String,
    },

    #[error("duplicate patient_id {0}")]
    DuplicatePatient(String),

    #[error("unknown patient {0}")]
    UnknownPatient(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("untrainable: {0}")]
    Untrainable(String),

    #[error("malformed binary file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }
}
