use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] slicebench::Error),

    #[error(transparent)]
    Remote(#[from] crate::remote::RemoteError),

    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("background task failed: {0}")]
    Task(String),
}

impl ServiceError {
    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        ServiceError::NotFound { kind, id: id.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ServiceError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable error code for API payloads.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Core(_) => "invalid_input",
            ServiceError::Remote(crate::remote::RemoteError::Protocol { .. }) => "remote_protocol",
            ServiceError::Remote(_) => "remote_transport",
            ServiceError::NotFound { .. } => "not_found",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Io { .. } => "io",
            ServiceError::Task(_) => "internal",
        }
    }
}
