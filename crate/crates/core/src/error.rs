use thiserror::Error;

/// Errors raised by constructions and analyses in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rotation number {value} lies within 1e-12 of the rational {p}/{q}")]
    RationalRotation { value: f64, p: i64, q: i64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("winding counter exceeded 2^62 after {steps} steps")]
    WindingOverflow { steps: i64 },

    #[error("lift is not a monotone degree-one map near x = {x}")]
    NotMonotone { x: f64 },

    #[error("state does not match the map: {0}")]
    StateMismatch(&'static str),

    #[error("series differ in start point or horizon ({0})")]
    HorizonMismatch(String),

    #[error("beta evaluated to a non-finite value at gap index {index}")]
    NonFiniteBeta { index: i64 },

    #[error(
        "stage {stage} construction failed: condition {condition} did not pass before q exceeded {q_cap}"
    )]
    StageFailure {
        stage: usize,
        condition: String,
        q_cap: u64,
    },

    #[error("malformed stage data: {0}")]
    StageFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
