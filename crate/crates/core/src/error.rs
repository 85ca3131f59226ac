use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "matrix is not positive semidefinite: eigenvalue {eigenvalue:e} is below -{threshold:e}"
    )]
    NotPsd { eigenvalue: f64, threshold: f64 },

    #[error("ill-conditioned pilot comb: |gamma| = {magnitude:e} at comb index {index} is below floor {floor:e}")]
    IllConditionedComb {
        index: usize,
        magnitude: f64,
        floor: f64,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
