use thiserror::Error;

/// Errors raised by the numerical kernels and the higher level models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole of e_q at t = {t}")]
    Pole { t: f64 },

    #[error("series not converged after {terms} terms (last term {last:e})")]
    Truncation { terms: usize, last: f64 },

    #[error("Jackson sum does not decay towards index {index} (last shell {shell:e}, partial sum {partial:e})")]
    Divergence { index: i64, shell: f64, partial: f64 },

    #[error("gaussian tag mismatch: {0}")]
    TagMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QError>;

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> QError {
    QError::InvalidParameter {
        name,
        value,
        reason,
    }
}
