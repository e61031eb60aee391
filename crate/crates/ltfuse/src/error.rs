use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of the CLI and file layer, grouped by exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// 2 usage, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn in_file(path: &Path, msg: impl std::fmt::Display) -> Self {
        Error::Data(format!("{}: {msg}", path.display()))
    }
}

impl From<ltfuse_core::Error> for Error {
    fn from(e: ltfuse_core::Error) -> Self {
        match e {
            e if e.is_numeric() => Error::Numeric(e.to_string()),
            ltfuse_core::Error::Config(m) => Error::Usage(m),
            e => Error::Data(e.to_string()),
        }
    }
}
