use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed pcap global header: {0}")]
    PcapHeader(String),

    #[error("unsupported pcap link type {0} (only Ethernet = 1 is supported)")]
    UnsupportedLinkType(u32),

    #[error("packet at {timestamp_us} us arrived more than {window_us} us out of order")]
    OutOfOrder { timestamp_us: u64, window_us: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("width mismatch: expected {expected} features, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("class `{0}` has no training rows")]
    EmptyClass(String),

    #[error("non-finite value in row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("model file format version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("{method} needs at most {max} active features, got {actual}; use the tree or kernel explainer")]
    TooManyFeatures {
        method: &'static str,
        max: usize,
        actual: usize,
    },

    #[error("explainer does not support model kind {0}")]
    UnsupportedModel(String),

    #[error("singular regression design: {0}")]
    Singular(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. }
            | Error::InvalidInput(_)
            | Error::WidthMismatch { .. }
            | Error::TooManyFeatures { .. }
            | Error::UnsupportedModel(_) => ErrorClass::Validation,
            Error::Singular(_) => ErrorClass::Internal,
            _ => ErrorClass::Data,
        }
    }
}
