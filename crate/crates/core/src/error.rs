use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("unsupported data type in {path}: {dtype}")]
    UnsupportedDataType { path: PathBuf, dtype: String },

    #[error("payload size mismatch in {path}: header expects {expected} bytes, found {found}")]
    PayloadSize {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at voxel {index} in {path}")]
    NonFinite { path: PathBuf, index: usize },

    #[error("unsupported volume format for {0}")]
    UnsupportedFormat(PathBuf),

    #[error("volume is not a binary mask: {0}")]
    NotBinary(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid patch grid: {0}")]
    InvalidGrid(String),

    #[error("coordinate {coord:?} outside volume of dims {dims:?}")]
    OutOfBounds { coord: [usize; 3], dims: [usize; 3] },

    #[error("patch index {0} out of range")]
    PatchIndexOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("voxel {0:?} is background")]
    Background([usize; 3]),

    #[error("no skeleton voxel within {radius} voxels of {poi:?}")]
    NoSkeletonNearby { poi: [usize; 3], radius: usize },

    #[error("unknown column: {0}")]
    UnknownColumn(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
