use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mask has no set pixels")]
    EmptyMask,

    #[error("frame data length {got} does not match {width}x{height}x3")]
    FrameSize { width: usize, height: usize, got: usize },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },

    #[error("point ({x}, {y}) lies outside the {width}x{height} frame")]
    OutOfBounds { x: i64, y: i64, width: usize, height: usize },

    #[error("bbox {0:?} is not inside the frame")]
    OutOfFrame(crate::model::BBox),

    #[error("bbox {0:?} is too small to track")]
    DegenerateBBox(crate::model::BBox),

    #[error("segmentation produced no usable mask")]
    NoMask,

    #[error("appearance window is empty")]
    EmptyWindow,

    #[error("the frame sequence is empty")]
    NoFrames,

    #[error("frame directory {0} does not exist")]
    MissingDirectory(PathBuf),

    #[error("no frame_%06d.ppm files found in {0}")]
    EmptySequence(PathBuf),

    #[error("frame indices are not contiguous: expected {expected}, found {found}")]
    NonContiguous { expected: usize, found: usize },

    #[error("malformed PPM {path}: {reason}")]
    MalformedPpm { path: PathBuf, reason: String },

    #[error("frame sizes differ within sequence: {0}")]
    MixedFrameSizes(PathBuf),

    #[error("frame index {index} out of range (sequence has {len} frames)")]
    FrameIndex { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),

    #[error("invalid track log: {0}")]
    InvalidLog(String),

    #[error("track log and ground truth disagree: {0}")]
    FrameMismatch(String),

    #[error("no per-frame timings recorded")]
    MissingTimings,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }
}
