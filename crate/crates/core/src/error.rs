use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} is outside [{lower}, {upper}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("non-finite coefficient output at Euler step {step}")]
    NonFiniteCoefficient { step: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unsupported operation `{operation}` for {subject}")]
    Unsupported {
        operation: &'static str,
        subject: String,
    },

    #[error("cannot parse process `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("realized M_n = {realized} exceeds the substrate headroom {headroom}")]
    HeadroomExceeded { realized: f64, headroom: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn unsupported(operation: &'static str, subject: impl Into<String>) -> Self {
        Error::Unsupported {
            operation,
            subject: subject.into(),
        }
    }
}
