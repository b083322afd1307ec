use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value {d} lies outside the open link range ({a}, {b})")]
    OutOfLinkRange { d: f64, a: f64, b: f64 },

    #[error("non-finite {quantity} at t = {t}")]
    NonFinite { t: usize, quantity: &'static str },

    #[error("series too short: n = {n}, need at least {min}")]
    SeriesTooShort { n: usize, min: usize },

    #[error("series is constant; the model is not identified")]
    DegenerateSeries,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid_param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
