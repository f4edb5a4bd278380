//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh is not closed: {0}")]
    OpenMesh(String),

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("fracture surface has no samples")]
    EmptySurface,

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("non-finite loss at epoch {epoch}, shape {shape}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        shape: String,
        detail: String,
    },

    #[error("checkpoint architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing artifact {path}; produce it with `{producer}`")]
    MissingArtifact { path: PathBuf, producer: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            Error::NonFiniteLoss { .. } | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
