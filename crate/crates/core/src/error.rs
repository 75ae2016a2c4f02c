use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("path not found or holds no frames: {0}")]
    MissingPath(PathBuf),
    #[error("frame {file} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    MixedDimensions {
        file: String,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("frame is {width}x{height}, at least {min}x{min} required")]
    FrameTooSmall { width: usize, height: usize, min: usize },
    #[error("keypoint ({x}, {y}) lies within the descriptor border")]
    KeypointNearBorder { x: f64, y: f64 },
    #[error("empty descriptor list")]
    EmptyInput,

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("insufficient matches: {0} (need at least 4)")]
    InsufficientMatches(usize),
    #[error("no consensus: best model has {0} inliers (need at least 8)")]
    NoConsensus(usize),
    #[error("invalid RANSAC parameters: {0}")]
    InvalidParams(String),

    #[error("a motion chain needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("pair {0} in the requested range has no homography")]
    GapInChain(usize),
    #[error("index range {i}..{j} invalid for {frames} frames")]
    IndexOutOfRange { i: usize, j: usize, frames: usize },
    #[error("decomposition produced non-finite values")]
    NonFiniteDecomposition,
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("unsupported chain version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("homography is singular")]
    SingularHomography,

    #[error("pair counts differ: {reference} vs {generated}")]
    LengthMismatch { reference: usize, generated: usize },
    #[error("coverage {coverage:.3} below the {threshold} threshold")]
    LowCoverage { coverage: f64, threshold: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weight out of range: {0}")]
    WeightOutOfRange(String),
    #[error("invalid adapter: {0}")]
    InvalidAdapter(String),
    #[error("invalid loss value: {0}")]
    InvalidLoss(String),

    #[error("invalid oracle spec: {0}")]
    InvalidSpec(String),
}
