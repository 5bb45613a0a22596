use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters. `field` names the offending key.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// Parse failure in a config file, with 1-based line number.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// NaN or Inf appeared in the wavefunction.
    #[error("numerical blowup at step {step} (t = {time} a.u.)")]
    Blowup { step: usize, time: f64 },

    #[error("imaginary-time relaxation did not converge within {iterations} iterations (last dE = {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("malformed {kind}: {message}")]
    Format { kind: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse { .. } | Error::Usage(_) | Error::Format { .. } => 2,
            Error::Blowup { .. } | Error::NotConverged { .. } => 3,
            Error::Io { .. } => 1,
        }
    }
}
