use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid {what}: {reason}")]
    InvalidParameter { what: &'static str, reason: String },

    #[error("box dimension {dim} exceeds vertex enumeration capacity {max}")]
    Capacity { dim: usize, max: usize },

    #[error("drift does not vanish at the origin: |f(0)| = {norm:e}")]
    DriftNotZero { norm: f64 },

    #[error("non-finite value while evaluating {what}")]
    NonFinite { what: &'static str },

    #[error("unknown built-in example `{0}`")]
    UnknownExample(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
