use std::fmt;

use thiserror::Error;

/// A validation failure attached to a dotted configuration path such as `domain.b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge (estimated residual {residual:e})")]
    Quadrature { residual: f64 },

    #[error("covariance matrix is indefinite: eigenvalue {eigenvalue:e} below jitter tolerance")]
    Indefinite { eigenvalue: f64 },

    #[error("eigenpair {index} has residual {residual:e} above tolerance")]
    Eigensolver { index: usize, residual: f64 },

    #[error("abscissa {x} outside the supported span [{lo}, {hi}]")]
    OutOfSpan { x: f64, lo: f64, hi: f64 },

    #[error("truncation certificate unreachable: {0}")]
    Truncation(String),

    #[error("configuration invalid: {}", join_fields(.0))]
    Validation(Vec<FieldError>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

fn join_fields(errors: &[FieldError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
