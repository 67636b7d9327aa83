use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or out-of-domain argument.
    #[error("domain error: {0}")]
    Domain(String),
    /// Configuration parse/validation failure.
    #[error("config error: {0}")]
    Config(String),
    /// Physics failure during a run (trap lost, unstable site, ...).
    #[error("physics error: {0}")]
    Physics(String),
    /// Estimator or optimizer failure.
    #[error("fit error: {0}")]
    Fit(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn physics(msg: impl Into<String>) -> Self {
        Error::Physics(msg.into())
    }
    pub fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
