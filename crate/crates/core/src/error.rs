use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A non-finite value appeared while evaluating a particle update.
    #[error("non-finite {what} at particle {particle}{}", .iteration.map(|i| format!(" (iteration {i})")).unwrap_or_default())]
    Numerical {
        what: &'static str,
        particle: usize,
        iteration: Option<usize>,
    },

    #[error("unsupported dynamics: {0}")]
    UnsupportedDynamics(String),

    #[error("cannot parse row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the outer iteration index to a numerical abort.
    pub fn at_iteration(self, iter: usize) -> Self {
        match self {
            Error::Numerical { what, particle, .. } => Error::Numerical {
                what,
                particle,
                iteration: Some(iter),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
