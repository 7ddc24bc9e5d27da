use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("zero labeled pixels")]
    ZeroLabeledPixels,

    #[error("empty raster")]
    EmptyRaster,

    #[error("payload length mismatch for {path}: expected {expected} bytes, found {actual}")]
    PayloadLength {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("malformed header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("non-finite sample in {path} at byte offset {offset}")]
    NonFinitePayload { path: PathBuf, offset: u64 },

    #[error("illegal mask value {value} at pixel {index}")]
    IllegalMaskValue { index: usize, value: u8 },

    #[error("unsupported model format version {0:?}")]
    UnsupportedVersion(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical routines themselves rather than of
    /// the data handed to them.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
