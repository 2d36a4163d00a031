use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied data that violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Configuration is malformed; `field` is a dotted path into the config.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    /// An enumeration would exceed the configured size cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// The remote peer violated the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The remote peer failed, timed out or went away.
    #[error("backend error (request {request_id:?}): {message}")]
    Backend {
        request_id: Option<u64>,
        message: String,
    },

    #[error("all {0} samples abstained; nothing to vote on")]
    EmptyVote(usize),

    #[error("sample {index} failed: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A checked invariant did not hold.
    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub(crate) fn backend(request_id: Option<u64>, message: impl Into<String>) -> Self {
        Error::Backend {
            request_id,
            message: message.into(),
        }
    }

    /// Process exit code for this error: 1 invariant failure, 2 usage or
    /// config problem, 3 backend failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant { .. } => 1,
            Error::Protocol(_) | Error::Backend { .. } => 3,
            Error::Batch { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
