use std::path::PathBuf;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown or missing token")]
    Unauthorized,
    #[error("{0}")]
    BadSubmission(paveval_core::Error),
    #[error("image ids not in ground truth: {}", .0.join(", "))]
    UnknownImages(Vec<String>),
    #[error("ground truth not loaded")]
    GroundTruthUnavailable,
    #[error("unknown team {0}")]
    UnknownTeam(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corrupt submission log {path} line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ServiceError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<paveval_core::Error> for ServiceError {
    fn from(e: paveval_core::Error) -> Self {
        match e {
            paveval_core::Error::UnknownImages(ids) => ServiceError::UnknownImages(ids),
            other => ServiceError::BadSubmission(other),
        }
    }
}
