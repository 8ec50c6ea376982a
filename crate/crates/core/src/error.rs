use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("degenerate point configuration: {0}")]
    DegenerateConfig(String),

    #[error("matrix is not a rotation: {0}")]
    NotOrthonormal(String),

    #[error("invalid camera pose: {0}")]
    InvalidPose(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("visibility mask references triangle {index} but the mesh has {count}")]
    CorruptMask { index: u32, count: usize },

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("invalid feature set: {0}")]
    InvalidFeature(String),

    #[error("target sequence exhausted: source has {source_len} frames, target only {target_len}")]
    TargetExhausted { source_len: usize, target_len: usize },

    #[error("bounding box {0} does not overlap the frame")]
    OutOfFrame(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures reading or decoding input files, as opposed to
    /// inputs that decoded fine but violate a contract.
    pub fn is_ingest(&self) -> bool {
        matches!(self, Error::Ingest(_) | Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
