use thiserror::Error;

/// Errors produced by any layer of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at record {record}: {message}")]
    Parse {
        path: String,
        record: usize,
        message: String,
    },

    #[error("shape mismatch in {op}: {details}")]
    Shape { op: String, details: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training aborted: {0}")]
    Training(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(op: &str, details: impl Into<String>) -> Self {
        Error::Shape {
            op: op.to_string(),
            details: details.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
