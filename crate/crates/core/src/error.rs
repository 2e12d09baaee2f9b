use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss at perturbed coordinate {param}[{coord}]")]
    NonFinite { param: String, coord: usize },

    #[error("optimizer step without populated gradients")]
    GradientsMissing,

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),

    #[error("index {index} out of range (size {size}) in {what}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("xml: {0}")]
    Xml(String),

    #[error("alignment: {0}")]
    Alignment(String),

    #[error("{path}:{line}: {message}")]
    Embeddings {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no transfer embedding cached for sentence `{0}`")]
    MissingTransfer(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("architecture mismatch: expected {expected}, found {found}")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("{0}")]
    Unsupported(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite { .. } => "non_finite",
            Error::GradientsMissing => "gradients_missing",
            Error::UnknownParam(_) => "unknown_param",
            Error::DuplicateParam(_) => "duplicate_param",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Checkpoint(_) => "checkpoint",
            Error::Xml(_) => "xml",
            Error::Alignment(_) => "alignment",
            Error::Embeddings { .. } => "embeddings",
            Error::MissingTransfer(_) => "missing_transfer",
            Error::Config(_) => "config",
            Error::ArchitectureMismatch { .. } => "architecture_mismatch",
            Error::Unsupported(_) => "unsupported",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
