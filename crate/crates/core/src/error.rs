use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, split, environment, or evaluation parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed measurement, map, or report file contents.
    #[error("format error: {0}")]
    Format(String),

    /// Argument outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A signal-analysis step could not produce a result (no taps above threshold, zero gains, ...).
    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("insufficient samples: N = {n} with epsilon = {epsilon} gives order index 0")]
    InsufficientSamples { n: usize, epsilon: f64 },

    #[error("insufficient data: {got} training locations, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    /// Linear-algebra failure. `condition_estimate` is the squared ratio of the largest to the
    /// smallest Cholesky pivot seen before failure (a cheap lower bound on the condition number).
    #[error("numerical error: {message} (condition estimate {condition_estimate:.3e})")]
    Numerical {
        message: String,
        condition_estimate: f64,
    },

    #[error("campaign aborted: {failed} of {total} repetitions failed at D = {d_train}")]
    CampaignAborted {
        d_train: usize,
        failed: usize,
        total: usize,
    },

    #[error("output already exists: {0}")]
    OutputExists(PathBuf),

    #[error("{path}: {source}")]
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
}
