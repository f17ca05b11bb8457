use thiserror::Error;

/// Errors produced by the library surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("source term violates the Osgood condition: {0}")]
    NonOsgood(String),

    #[error("source term is not a valid reaction: {0}")]
    InvalidSource(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid kernel model: {0}")]
    InvalidKernel(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("certificate rejected: {0}")]
    CertificateRejected(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
