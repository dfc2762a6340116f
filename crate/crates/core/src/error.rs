//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by network loading, model assembly, sampling and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent stream-network topology or site data.
    #[error("invalid network: {0}")]
    Network(String),
    /// Invalid user configuration (sampler settings, model spec, flags).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Input data that does not conform to the expected shape or schema.
    #[error("invalid input: {0}")]
    Input(String),
    /// A factorization or other numerical step failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable category used by the command-line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Network(_) => "network-error",
            Error::Config(_) => "config-error",
            Error::Input(_) => "input-error",
            Error::Numerical(_) => "numerical-error",
            Error::Io(_) => "io-error",
            Error::Csv(_) => "parse-error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
