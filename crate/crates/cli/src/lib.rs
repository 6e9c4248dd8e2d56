//! Configuration and orchestration behind the `gsvgd` binary.

// `!(x > 0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;

use std::path::{Path, PathBuf};

pub use config::{parse_config, RunConfig};
pub use experiment::{run_experiment, Metrics, Summary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Run(gsvgd::Error),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 config, 3 numerical abort, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 4,
            CliError::Run(e) => match e {
                gsvgd::Error::Numerical { .. } => 3,
                gsvgd::Error::Io { .. } | gsvgd::Error::Ingestion { .. } => 4,
                _ => 2,
            },
        }
    }
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}
