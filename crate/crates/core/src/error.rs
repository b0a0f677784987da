use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {actual_w}x{actual_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("channel count mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("buffer length {actual} does not match {width}x{height}x{channels}")]
    BufferLength {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("image {width}x{height} is smaller than the minimum edge {min_edge}")]
    TooSmall {
        width: usize,
        height: usize,
        min_edge: usize,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("mask has no hole pixels")]
    EmptyMask,
    #[error("no valid source patch exists outside the hole")]
    NoValidSource,
    #[error("patch at ({x}, {y}) is out of bounds")]
    OutOfBounds { x: i64, y: i64 },
    #[error("source patch at ({x}, {y}) overlaps the hole")]
    SourceOverlapsHole { x: i64, y: i64 },
    #[error("missing guide: {0}")]
    MissingGuide(&'static str),
    #[error("linear solve did not converge (relative residual {residual:e})")]
    NonConvergent { residual: f64 },
    #[error("scorer failed on pair ({left}, {right}): {reason}")]
    Scorer {
        left: usize,
        right: usize,
        reason: String,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            actual_w: actual.0,
            actual_h: actual.1,
        }
    }
}
