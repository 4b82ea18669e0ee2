use thiserror::Error;

/// Errors raised by the polar lattice library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("block length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("frozen position {0} carries a nonzero bit")]
    NonzeroFrozen(usize),

    #[error("index {index} out of range for block length {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("k = {k} out of range 0..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("unsupported CRC width {0} (supported: 0, 6, 10, 16)")]
    UnsupportedCrc(usize),

    #[error("information sets are not nested between levels {0} and {1}")]
    NotNested(usize, usize),

    #[error("density grids differ")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design infeasible: {0}")]
    Infeasible(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
