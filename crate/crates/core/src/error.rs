//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two rasters that must share dimensions do not.
    #[error("{what}: dimensions {actual_width}x{actual_height} do not match expected {expected_width}x{expected_height}")]
    DimensionMismatch {
        what: &'static str,
        expected_width: usize,
        expected_height: usize,
        actual_width: usize,
        actual_height: usize,
    },

    /// A channel intensity, depth value or config threshold left [0, 1].
    #[error("{what}: value {value} is not a finite number in [0, 1]")]
    OutOfRange { what: String, value: f64 },

    /// Bounding-box corners violate x_min <= x_max, y_min <= y_max.
    #[error("degenerate bounding box: ({x_min}, {y_min})..({x_max}, {y_max})")]
    DegenerateBox {
        x_min: u32,
        y_min: u32,
        x_max: u32,
        y_max: u32,
    },

    /// A bounding box sticks out of its image.
    #[error(
        "bounding box ({x_min}, {y_min})..({x_max}, {y_max}) exceeds image bounds {width}x{height}"
    )]
    BoxOutOfBounds {
        x_min: u32,
        y_min: u32,
        x_max: u32,
        y_max: u32,
        width: usize,
        height: usize,
    },

    /// Gaussian kernel sizes must be odd and positive.
    #[error("invalid gaussian kernel size {0}: must be odd and >= 1")]
    InvalidKernel(usize),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic scene spec: {0}")]
    InvalidSpec(String),

    /// Raster file header could not be parsed; `offset` is the byte position.
    #[error("{}: malformed header at byte {offset}: {reason}", path.display())]
    MalformedHeader {
        path: PathBuf,
        offset: usize,
        reason: String,
    },

    /// Raster file payload is shorter than the header promises.
    #[error("{}: truncated payload: expected {expected} bytes, found {actual}", path.display())]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    /// A CSV cell failed to parse or is out of range.
    #[error("{}: line {line}, field {field}: {reason}", path.display())]
    MalformedValue {
        path: PathBuf,
        line: usize,
        field: usize,
        reason: String,
    },

    /// A JSON document does not match the expected schema; `at` is the field path.
    #[error("schema violation at {at}: {reason}")]
    SchemaViolation { at: String, reason: String },

    #[error("duplicate scene id: {0}")]
    DuplicateSceneId(String),

    /// Chi-squared is undefined when a row or column margin is zero.
    #[error("chi-squared undefined: {0} margin sums to zero")]
    ZeroMargin(&'static str),

    /// A proposal set was paired with a scene it does not belong to.
    #[error("proposals belong to scene '{proposals}', not '{scene}'")]
    SceneMismatch { scene: String, proposals: String },

    #[error("{}: {source}", path.display())]
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
}
