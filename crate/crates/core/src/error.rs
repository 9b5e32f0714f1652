use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    Dimension {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("feature vector at index {index} has zero norm")]
    ZeroFeature { index: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("operation produced or received an empty point cloud")]
    EmptyCloud,

    #[error("requested {requested} points but only {available} are available")]
    InsufficientPoints { requested: usize, available: usize },

    #[error("annotation #{position} ({annotation}) does not resolve to a cloud index")]
    Index { position: usize, annotation: String },

    #[error("annotations #{first} and #{second} both resolve to cloud index {index}")]
    DuplicateAnnotation {
        first: usize,
        second: usize,
        index: usize,
    },

    #[error("template with {k} keypoints cannot be used for coarse matching: {reason}")]
    DegenerateTemplate { k: usize, reason: &'static str },

    #[error("degenerate point geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("only {available} keypoints have feature-gated candidates, need at least 3")]
    InsufficientCandidates { available: usize },

    #[error("no hypothesis reached 3 inliers after {iterations} iterations")]
    NoConsensus { iterations: usize },

    #[error("scene spec rejected: {0}")]
    Spec(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (supported: {supported})")]
    VersionUnsupported { found: u32, supported: u32 },

    #[error(
        "payload truncated at byte offset {offset}: file needs {expected} bytes, has {available}"
    )]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        available: usize,
    },

    #[error("{extra} unexpected trailing bytes starting at byte offset {offset}")]
    TrailingData { offset: usize, extra: usize },

    #[error("non-finite value at byte offset {offset}")]
    NonFiniteValue { offset: usize },

    #[error("json error at {path}: {message}")]
    Json { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidValue(msg.into())
    }
}
