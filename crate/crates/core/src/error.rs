use thiserror::Error;

/// Errors raised by the numeric layers of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or matrix dimensions do not match.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix fails a structural requirement (symmetry, PSD, invertibility).
    #[error("matrix error: {0}")]
    Matrix(String),

    /// A model configuration is invalid or unsupported.
    #[error("model error: {0}")]
    Model(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn matrix(msg: impl Into<String>) -> Self {
        Error::Matrix(msg.into())
    }

    pub fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }
}
