use std::path::PathBuf;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value in {location}")]
    NonFinite { location: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("training interval {interval} failed: {source}")]
    IntervalTraining {
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("partitioning failed at T = {horizon}: {source}")]
    Partition {
        horizon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("spectral solver became unstable at step {step} (t = {time})")]
    Instability { step: usize, time: f64 },

    #[error("problem `{0}` has no closed-form solution; use a reference grid")]
    NoExactSolution(String),

    #[error("query out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("reference does not cover the evaluation grid: {0}")]
    Coverage(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

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

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by optimization blowing up rather than bad input.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::NonFinite { .. } | Error::Optimizer(_) => true,
            Error::IntervalTraining { source, .. } | Error::Partition { source, .. } => {
                source.is_divergence()
            }
            _ => false,
        }
    }
}
