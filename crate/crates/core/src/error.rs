use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {0} is outside [0, 1]")]
    TimeOutOfRange(f64),

    /// A quantity divides by `alpha_t = 0` or `sigma_t = 0` at an endpoint.
    #[error("{what} diverges at t = {t}")]
    Divergent { what: &'static str, t: f64 },

    #[error("time ordering violated: s = {s} must not exceed t = {t}")]
    Ordering { s: f64, t: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss {loss} at step {step} (batch t in [{t_lo:.6}, {t_hi:.6}])")]
    NonFinite {
        step: u64,
        t_lo: f64,
        t_hi: f64,
        loss: f64,
    },

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
