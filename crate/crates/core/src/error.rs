use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("negative duration: t_end {t_end} < t_start {t_start}")]
    NegativeDuration { t_start: u64, t_end: u64 },
    #[error("event timestamp {t} outside stream window [{t_start}, {t_end}]")]
    TimestampOutOfRange { t: u64, t_start: u64, t_end: u64 },
    #[error("invalid time range [{t0}, {t1})")]
    InvalidRange { t0: u64, t1: u64 },
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("frame geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("frame rate must be positive and finite, got {0}")]
    DegenerateFps(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("time window must be positive")]
    ZeroWindow,
    #[error("degenerate box: width and height must be positive")]
    DegenerateBox,
    #[error("row {row}: box has non-positive width or height")]
    NonPositiveBox { row: usize },
    #[error("frame {frame} at {t} us is more than one bin past the stream end {t_end} us; check fps")]
    FpsMismatch { frame: u32, t: u64, t_end: u64 },
    #[error("image error: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn parse(record: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            record,
            message: message.into(),
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
