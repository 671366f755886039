use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of bounds for length {len}")]
    OutOfBounds { index: usize, len: usize },

    #[error("symbol {symbol} does not fit in {width} bits")]
    SymbolOutOfAlphabet { symbol: u128, width: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The vocabulary cannot take the new tokens without exceeding sigma.
    #[error("vocabulary capacity {capacity} exceeded: {required} ids required")]
    Capacity { capacity: usize, required: usize },

    #[error("no keywords extracted from query")]
    NoKeywords,

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("corrupt store image: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn out_of_bounds(index: usize, len: usize) -> Self {
        Error::OutOfBounds { index, len }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
