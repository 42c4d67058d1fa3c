use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("invalid raster shape {width}x{height}x{channels} for {len} values")]
    InvalidShape {
        width: usize,
        height: usize,
        channels: usize,
        len: usize,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("truncated file: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },

    #[error("header/payload length mismatch: header implies {expected} payload bytes, file has {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("window must be odd and at least 1, got {0}")]
    EvenWindow(usize),

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing parameter {0:?}")]
    MissingParameter(String),

    #[error("parameter {name:?} has shape {found:?}, expected {expected:?}")]
    ParameterShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("backward called without a matching training-mode forward cache: {0}")]
    StaleCache(String),

    #[error("missing prediction for sample {label}/{index}: {path}")]
    MissingPrediction { label: String, index: usize, path: PathBuf },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn mismatch(left: impl std::fmt::Display, right: impl std::fmt::Display) -> Self {
        Error::DimensionMismatch {
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
