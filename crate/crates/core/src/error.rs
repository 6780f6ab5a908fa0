use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: unsupported {what}")]
    Unsupported { path: PathBuf, what: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("duplicate vertex index {index} in label file (line {line})")]
    DuplicateIndex { index: usize, line: usize },

    #[error("unknown class id {0}")]
    UnknownClass(u32),

    #[error("correspondence violation between meshes {first} and {second}: {reason}")]
    Correspondence {
        first: usize,
        second: usize,
        reason: String,
    },

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("missing predictions for shapes: {0:?}")]
    MissingPredictions(Vec<usize>),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("model file: {0}")]
    Format(String),

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Stable module-qualified identifier used in machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io.failure",
            Error::Parse { .. } => "mesh_core.parse",
            Error::Unsupported { .. } => "mesh_core.unsupported",
            Error::InvalidMesh(_) => "mesh_core.invalid_mesh",
            Error::InvalidCloud(_) => "mesh_core.invalid_cloud",
            Error::InvalidLabels(_) => "mesh_core.invalid_labels",
            Error::DuplicateIndex { .. } => "mesh_core.duplicate_index",
            Error::UnknownClass(_) => "mesh_core.unknown_class",
            Error::Correspondence { .. } => "mesh_core.correspondence",
            Error::Alignment(_) => "ssm.alignment",
            Error::Dimension { .. } => "ssm.dimension",
            Error::InvalidArgument(_) => "core.invalid_argument",
            Error::UndefinedMetric(_) => "eval.undefined_metric",
            Error::MissingPredictions(_) => "eval.missing_predictions",
            Error::NonFiniteLoss { .. } => "segmenter.non_finite_loss",
            Error::Format(_) => "core.format",
            Error::Json { .. } => "core.json",
        }
    }

    /// True for failures caused by input data rather than the program itself.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::NonFiniteLoss { .. })
    }
}
