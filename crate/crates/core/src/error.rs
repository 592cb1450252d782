use thiserror::Error;

/// Errors produced by the search, calibration and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("m = {m} lies outside the inference region [{floor}, {l}]")]
    OutOfRegion { m: u32, floor: u32, l: u32 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate channel: lambda0 + lambda1 = {0} >= 1")]
    DegenerateChannel(f64),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("{a} has no inverse modulo {n}")]
    NoInverse { a: u64, n: u64 },

    #[error("false-positive bound is invalid: {0}")]
    BoundInvalid(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid registration: {0}")]
    InvalidRegistration(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("invalid profiles: {0}")]
    InvalidProfiles(String),

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
