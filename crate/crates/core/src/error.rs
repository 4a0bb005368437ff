use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid depth image: {0}")]
    InvalidImage(String),

    #[error("invalid plane")]
    InvalidPlane,

    #[error("invalid ransac config: {0}")]
    InvalidConfig(String),

    #[error("degenerate input")]
    DegenerateInput,

    #[error("no constrained plane found")]
    NoConstrainedPlane,

    #[error("point cloud length mismatch: gt has {gt}, prediction has {pred}")]
    LengthMismatch { gt: usize, pred: usize },

    #[error("no comparable points")]
    NoComparablePoints,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("camera below floor")]
    CameraBelowFloor,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
