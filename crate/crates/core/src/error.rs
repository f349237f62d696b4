use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// Quadrature gave up before reaching the requested tolerance.
    #[error("accuracy error: {message} (best estimate {best_estimate}, error estimate {abs_error_estimate})")]
    Accuracy {
        message: String,
        best_estimate: f64,
        abs_error_estimate: f64,
    },

    /// The optimizer produced a non-finite loss. The trace up to that point is kept.
    #[error("optimization error after {iters} iterations: {message}")]
    Optimization {
        message: String,
        iters: usize,
        loss_trace: Vec<f64>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
