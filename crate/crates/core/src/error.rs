use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, channel count, range).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid model config: {0}")]
    Config(String),

    /// Weight file could not be decoded.
    #[error("weight format error in tensor `{tensor}`: {reason}")]
    Format { tensor: String, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("sample {index}: {reason}")]
    Sample { index: usize, reason: String },

    /// The region to crop does not overlap the frame; the tracked hand is gone.
    #[error("hand lost: {0}")]
    HandLost(String),

    #[error("joint {joint}: {reason}")]
    Joint { joint: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Image { path: PathBuf, reason: String },
}

impl Error {
    /// Process exit status for this error: 1 for bad input or arguments, 2
    /// for I/O, image and weight-file failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Image { .. } | Error::Format { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
