use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spline order must be in 2..=9, got {0}")]
    InvalidOrder(usize),
    #[error("length must be a power of two and at least {min}, got {got}")]
    NotPowerOfTwo { got: usize, min: usize },
    #[error("decomposition level {level} too deep for length {len}: need 1 <= level and 2^level <= len/8 (max level {max})")]
    LevelTooDeep { level: usize, len: usize, max: usize },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("incomplete coefficient tree: {0}")]
    IncompleteTree(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed PGM file: {0}")]
    Format(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
