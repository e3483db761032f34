use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the alignment stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate face: interocular distance {distance} px is below 1e-6")]
    DegenerateFace { distance: f64 },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("empty image")]
    EmptyImage,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("degenerate bounding box: {0}")]
    DegenerateBBox(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing common landmark: {0}")]
    MissingCommonLandmark(String),

    #[error("no pseudo-labelled samples survived the residual filter")]
    EmptyAfterFilter,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: header declares {declared} points but body has {found}")]
    CountMismatch {
        path: PathBuf,
        declared: usize,
        found: usize,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("image decode {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad input data rather than by the caller's usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_) | Error::ConfigInvalid(_))
    }
}
