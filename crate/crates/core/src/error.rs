use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: file not found", path.display())]
    FileNotFound { path: PathBuf },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Format { context: String, message: String },

    #[error("{context}: non-finite value at row {row}, column {col}")]
    NonFiniteValue { context: String, row: usize, col: usize },

    #[error("{context}: unsupported image format ({message})")]
    UnsupportedFormat { context: String, message: String },

    #[error("image {name} is {found} but earlier images are {expected}")]
    MixedDimensions {
        name: String,
        expected: String,
        found: String,
    },

    #[error("{}: no images found", path.display())]
    EmptyDirectory { path: PathBuf },

    #[error("duplicate voxel index {index} in mask {mask}")]
    DuplicateIndex { mask: String, index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("too few rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("k = {k} is too large (at most {max} for this data)")]
    KTooLarge { k: usize, max: usize },

    #[error("degenerate data: all images are identical")]
    DegenerateData,

    #[error("zero variance in {which} row {row}")]
    ZeroVariance { which: &'static str, row: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("voxel index {index} out of range for {n_voxels} voxels")]
    IndexOutOfRange { index: usize, n_voxels: usize },

    #[error("mask {0} selects no voxels")]
    EmptyMask(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

impl Error {
    /// True for failures of the filesystem itself rather than of the content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::FileNotFound { .. } | Error::Io { .. })
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}
