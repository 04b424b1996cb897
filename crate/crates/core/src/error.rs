use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed or violates an invariant.
    #[error("configuration error: {key}: {message}")]
    Config { key: String, message: String },

    /// Effective-bandwidth parameter outside the range where the Gaussian
    /// coefficient is real.
    #[error("epsilon {epsilon} outside (0, 1/sqrt(2*pi)]: the square root would be imaginary")]
    EpsilonDomain { epsilon: f64 },

    /// A rate query fell outside the flow's active interval.
    #[error("time {t} outside active interval [{start}, {end}) of flow {flow_id}")]
    OutOfInterval {
        flow_id: u64,
        t: f64,
        start: f64,
        end: f64,
    },

    /// Admit/depart bookkeeping went out of sync.
    #[error("bookkeeping error: {0}")]
    Bookkeeping(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
