use std::path::PathBuf;

use crate::volume::{MaskWindow, Scale, Shape};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape {0:?}: extents must be positive")]
    InvalidShape([usize; 3]),

    #[error("invalid mask window {0:?}: extents must be odd and positive")]
    InvalidWindow([usize; 3]),

    #[error("invalid scale {0:?}: strides must be at least 1")]
    InvalidScale([u32; 3]),

    #[error("invalid neighborhood: {0}")]
    InvalidNeighborhood(String),

    #[error("coordinate ({x}, {y}, {z}) is outside the volume")]
    OutOfBounds { x: i64, y: i64, z: i64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },

    #[error("window mismatch: expected {expected}, found {found}")]
    WindowMismatch { expected: MaskWindow, found: MaskWindow },

    #[error("scale {0} is not supported by this mask provider")]
    UnsupportedScale(Scale),

    #[error("offset {offset} does not fit inside mask window {window}")]
    OffsetOutsideWindow { offset: String, window: MaskWindow },

    #[error("value {value} at position {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph has no valid edges")]
    EmptyGraph,

    #[error("no segment reaches the minimum size {min_size}; nothing to seed from")]
    NoSeeds { min_size: usize },

    #[error("{count} voxels cannot be reached from any seed")]
    Unreachable { count: usize },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("payload length mismatch in {path}: expected {expected} bytes, found {found}")]
    LengthMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),

    #[error("I/O error on {path}: {source}")]
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

    /// True for errors caused by reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedHeader { .. }
                | Error::LengthMismatch { .. }
                | Error::UnsupportedDtype(_)
        )
    }
}
