//! One error type across the file formats and the command line, with the
//! documented exit codes.

use std::path::PathBuf;

/// Exit codes: 0 ok, 2 usage, 3 I/O, 4 format/version, 5 shape/topology.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Shape(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Format(_) => 4,
            CliError::Shape(_) => 5,
        }
    }

    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> CliError {
        CliError::Format(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> CliError {
        CliError::Shape(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
