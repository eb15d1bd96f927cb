use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical quantity or parameter is outside its valid domain.
    #[error("{name} out of domain: {detail}")]
    Domain { name: &'static str, detail: String },

    /// The kinetic model has no unique steady state.
    #[error("degenerate rate model: {0}")]
    Degenerate(String),

    /// An input violates a documented precondition (unsorted streams, bad window sizes, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Not enough data to perform a fit or estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The model produced a non-finite value for the supplied inputs.
    #[error("invalid model input: {0}")]
    ModelInput(String),

    /// The plane-wave basis is too small for the dielectric matrix to be inverted.
    #[error("plane-wave basis error: {0}")]
    Basis(String),

    /// A file does not follow the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    /// A pipeline stage failed; wraps the underlying error.
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            name,
            detail: detail.into(),
        }
    }

    /// True when the error stems from bad user input rather than a failed computation.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_invalid_input(),
            e => matches!(
                e,
                Error::Domain { .. } | Error::Contract(_) | Error::Format(_) | Error::Json(_)
            ),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
