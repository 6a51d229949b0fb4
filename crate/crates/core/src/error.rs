use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("kernel does not match the latent geometry: {0}")]
    GeometryMismatch(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("no threshold crossing: {0}")]
    NoCrossing(String),

    #[error("importance weights degenerate: {0}")]
    DegenerateWeights(String),

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("timed out: {0}")]
    Timeout(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}
