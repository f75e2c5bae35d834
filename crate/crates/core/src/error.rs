use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("not enough correspondences: need {needed}, have {found}")]
    InsufficientCorrespondences { needed: usize, found: usize },

    #[error("rank-deficient normal equations")]
    RankDeficient,

    #[error("vehicle center pixel ({row}, {col}) is not free space")]
    CenterNotFree { row: usize, col: usize },

    #[error("vehicle pose ({x:.3}, {y:.3}) lies inside an obstacle")]
    PoseInObstacle { x: f64, y: f64 },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures caused by the filesystem rather than by content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
