use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// The integrated state stopped being finite.
    #[error("integration diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    #[error("assumption violated: {0}")]
    Assumption(String),

    /// An identity that holds by construction was broken; indicates a bug.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("no finite velocity: {0}")]
    NoFiniteVelocity(String),

    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("config validation error in `{field}`: {msg}")]
    ConfigValidation { field: String, msg: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
