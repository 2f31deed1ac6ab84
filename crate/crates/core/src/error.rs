use thiserror::Error;

/// Errors produced anywhere in the release pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("invalid event log: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// `P + δ ≥ 1`: no finite ε bounds the advantage, the caller decides
    /// whether that means "no noise needed" or "filter the case".
    #[error("prior {prior} with advantage bound {delta} cannot be bounded (P + delta >= 1)")]
    Unboundable { prior: f64, delta: f64 },

    #[error("log unreleasable at delta = {delta}: every case was filtered")]
    Unreleasable { delta: f64 },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(locus: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            locus: locus.into(),
            message: message.into(),
        }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}
