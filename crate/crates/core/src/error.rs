use thiserror::Error;

/// Errors raised by the fusion engine.
#[derive(Debug, Error)]
pub enum FusionError {
    /// An argument lies outside the domain of the operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested combination of spaces, priors or families is not supported.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The evidence integral vanished for the given joint feature vector.
    #[error("numerical degeneracy: evidence underflows for features {features:?}")]
    Degenerate { features: Vec<f64> },

    /// A scenario document could not be parsed.
    #[error("scenario parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FusionError>;

pub(crate) fn invalid(msg: impl Into<String>) -> FusionError {
    FusionError::InvalidInput(msg.into())
}

pub(crate) fn unsupported(msg: impl Into<String>) -> FusionError {
    FusionError::Unsupported(msg.into())
}
