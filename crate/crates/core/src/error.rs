use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format {0:?} (only binary PGM \"P5\" is accepted)")]
    UnsupportedFormat(String),

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("unsupported maxval {0} (expected 255 or 65535)")]
    UnsupportedMaxval(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("image too small: min side {size} px, need at least {required} px")]
    TooSmall { size: usize, required: usize },

    #[error("requested {requested} decomposition levels, at most {max} possible")]
    LevelOverflow { requested: usize, max: usize },

    #[error("degenerate histogram: no threshold separates two classes")]
    DegenerateHistogram,

    #[error("weights file: {0}")]
    WeightsFormat(String),

    #[error("empty dataset")]
    EmptyDataset,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable code used in batch CSV reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::UnsupportedFormat(_) => "unsupported-format",
            Error::MalformedHeader(_) => "malformed-header",
            Error::UnsupportedMaxval(_) => "unsupported-maxval",
            Error::Truncated { .. } => "truncated",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::Manifest(_) => "manifest",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::TooSmall { .. } => "too-small",
            Error::LevelOverflow { .. } => "level-overflow",
            Error::DegenerateHistogram => "degenerate-histogram",
            Error::WeightsFormat(_) => "weights-format",
            Error::EmptyDataset => "empty-dataset",
        }
    }
}
