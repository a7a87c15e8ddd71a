use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    Format(String),

    /// A caller violated an operation's precondition (shapes, parity, ranges).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver diverged at iteration {iteration} (energy {energy:e})")]
    Diverged { iteration: usize, energy: f64 },

    /// The induced denoiser would not be strongly passive.
    #[error("passivity bound violated: weight * ||B^T B|| = {bound} > 1")]
    PassivityViolated { bound: f64 },
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
