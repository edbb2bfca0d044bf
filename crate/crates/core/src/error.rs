//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by library construction, decomposition, and routing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty {0} is not allowed")]
    Empty(&'static str),

    #[error("reduced QR requires rows >= cols, got {rows}x{cols}")]
    QrShape { rows: usize, cols: usize },

    #[error("rank budget {budget} out of range for {rows}x{cols} matrix")]
    RankBudget {
        budget: usize,
        rows: usize,
        cols: usize,
    },

    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdNotConverged { sweeps: usize },

    #[error("adapter {0} is degenerate: zero product has no principal direction")]
    DegenerateAdapter(String),

    #[error("{0} requires a shared A matrix; this library uses per-adapter A")]
    SharedARequired(&'static str),

    #[error("raw B matrices are not available: {0}")]
    MissingB(&'static str),

    #[error("missing {0} forms; run preprocessing first")]
    MissingForms(&'static str),

    #[error("scores are empty")]
    EmptyScores,

    #[error("score {index} is not comparable (NaN)")]
    BadScore { index: usize },

    #[error("k={k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("adapter {adapter} has {got} calibration samples, need at least 2")]
    TooFewSamples { adapter: usize, got: usize },

    #[error("length mismatch: {left} scores vs {right} stats")]
    LengthMismatch { left: usize, right: usize },

    #[error("method {0} has no calibrated variant")]
    NotCalibratable(&'static str),

    #[error("invalid adapter library: {0}")]
    LibraryInvalid(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Container(#[from] ContainerError),
}

/// Errors produced when reading or writing the library container format.
///
/// Each structural failure mode gets its own variant so callers can tell
/// a corrupted header from a short file from a checksum failure.
#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic bytes (not a library container)")]
    BadMagic,

    #[error("unsupported container version {0:#04x}")]
    UnsupportedVersion(u8),

    #[error("file truncated: need {needed} more bytes for {section}")]
    Truncated { section: &'static str, needed: usize },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("CRC-32 mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("inconsistent header: {0}")]
    HeaderInvalid(String),

    #[error("adapter id is not valid UTF-8")]
    BadId,

    #[error("non-finite value in stored {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
