use thiserror::Error;

/// Errors raised by the encoders, decoders and numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {0} lies outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("cell index {index} outside 1..={max}")]
    CellIndexOutOfRange { index: u64, max: u64 },
    #[error("operation needs a non-empty bit prefix")]
    EmptyPrefix,
    #[error("prefix length {0} exceeds the 64-bit pattern limit")]
    PrefixTooLong(usize),
    #[error("need {need} bits from position {start}, sequence has {have}")]
    InsufficientBits { start: usize, need: usize, have: usize },
    #[error("bit value {0} is neither 0 nor 1")]
    InvalidBit(u8),
    #[error("encoder queue of {len} bits exceeds q_max = {q_max}")]
    QueueOverflow { len: usize, q_max: usize },
    #[error("pending bit of age {age} exceeds the {usable} usable trajectory steps")]
    TrajectoryExhausted { age: usize, usable: usize },
    #[error("received sample is not finite")]
    NonFiniteSample,
    #[error("received vector has {got} components, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
