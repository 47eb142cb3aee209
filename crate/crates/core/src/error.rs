use thiserror::Error;

/// Errors raised by the library.
///
/// Validation failures never clamp: an out-of-range loss or confidence level
/// means something upstream is broken and the certificate would be invalid.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability out of range [0, 1]: {0}")]
    ProbabilityOutOfRange(f64),

    #[error("slack budget must be finite and nonnegative, got {0}")]
    InvalidSlack(f64),

    #[error("delta must lie in the open interval (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("{name} must be at least 1")]
    ZeroCount { name: &'static str },

    #[error("loss {value} at draw {draw}, example {example} is outside [0, 1]")]
    LossOutOfRange { draw: u64, example: usize, value: f64 },

    #[error("threshold t = {t} exceeds the aggregate mean p = {p}")]
    ThresholdAboveMean { t: f64, p: f64 },

    #[error("invalid rescaling interval [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("value {value} is outside the rescaling interval [{lower}, {upper}]")]
    OutsideInterval { value: f64, lower: f64, upper: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("loss matrix: {0}")]
    Matrix(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("certificate inconsistent: {0}")]
    Inconsistent(String),

    #[error("malformed certificate: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
