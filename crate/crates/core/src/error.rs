use thiserror::Error;

use crate::polar_graph::CnId;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("layer {layer}: size {detail} is not an integer")]
    NonIntegerLayer { layer: u32, detail: String },

    #[error("row {row} out of range 1..={max}")]
    RowOutOfRange { row: usize, max: usize },

    #[error("coordinates out of range: {0}")]
    CoordsOutOfRange(String),

    #[error("graph too large for exhaustive search: {size} > {limit}")]
    GraphTooLarge { size: usize, limit: usize },

    #[error("inconsistent symbols at check node {0}")]
    Inconsistent(CnId),

    #[error("block of {len} bytes exceeds capacity {capacity}")]
    BlockTooLarge { len: usize, capacity: usize },

    #[error("no finite sample count reaches the target")]
    NoFiniteAnswer,

    #[error("malformed encoding: {0}")]
    Malformed(String),

    #[error("peeling encoder stalled with {0} unresolved nodes")]
    EncoderStalled(usize),

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
