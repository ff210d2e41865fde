use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The request is well-formed but exceeds what exhaustive simulation supports.
    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("integration failure: norm drift {drift:.3e} exceeds {limit:.1e}; use a smaller step (dt = {dt})")]
    IntegrationFailure { drift: f64, limit: f64, dt: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("instance {uid}: {source}")]
    Instance {
        uid: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
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

    /// Attaches an instance uid to an error raised while processing that instance.
    pub fn for_instance(self, uid: &str) -> Self {
        match self {
            e @ Error::Instance { .. } => e,
            e => Error::Instance {
                uid: uid.to_string(),
                source: Box::new(e),
            },
        }
    }
}
