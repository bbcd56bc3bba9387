use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("index error: {what} index {index} out of range for {bound}")]
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("binding error: {0}")]
    Binding(String),

    #[error("collapse error: outcome {outcome} on qubit {qubit} has probability {probability:e}")]
    Collapse {
        qubit: usize,
        outcome: u8,
        probability: f64,
    },

    #[error("unsupported generator: slot `{slot}` drives a {gate} gate, which has no rotation generator")]
    UnsupportedGenerator { slot: String, gate: &'static str },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 usage, 3 data, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Divergence(_) => 4,
            Error::Io { .. } | Error::Format(_) | Error::Consistency(_) => 3,
            _ => 2,
        }
    }
}
