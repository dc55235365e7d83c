use num_complex::Complex64;
use thiserror::Error;

use crate::quad::QuadError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Lévy integral {moment} is not finite: {detail}")]
    Integrability { moment: &'static str, detail: String },

    #[error(
        "minimal martingale measure constraint violated: mu_s = {mu_s:e} must lie in ({lower:e}, 0] \
         (lower = -sigma^2 - C2)"
    )]
    Assumption { mu_s: f64, lower: f64 },

    #[error("z = {z} lies outside the analyticity strip {lo} < Im(z) < {hi}")]
    Domain { z: Complex64, lo: f64, hi: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),

    #[error("{what}: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Accuracy {
        what: &'static str,
        estimate: f64,
        tolerance: f64,
    },

    #[error("condition integral does not converge: {0}")]
    Divergence(String),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
