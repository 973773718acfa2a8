use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its admissible range.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input value is outside the domain of the operation (non-finite
    /// components, out-of-range indices, non-monotone quantiles).
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition does not hold (too few particles, empty
    /// batch, mismatched dimensions).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A particle position or gradient became non-finite during a run.
    #[error("divergence at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A config or CSV file could not be parsed.
    #[error("parse error in {context}: {detail}")]
    Parse { context: String, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            detail: detail.into(),
        }
    }
}
