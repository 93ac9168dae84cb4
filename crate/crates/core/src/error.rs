use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or preconditions from the caller.
    Usage,
    /// Malformed or inconsistent input data.
    Data,
    /// A numerical routine could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration space: {0}")]
    InvalidSpace(String),

    #[error("option `{option}`: {reason}")]
    InvalidValue { option: String, reason: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{0}` has no role assigned")]
    MissingRole(String),

    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("column `{0}` is constant")]
    ConstantColumn(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix is not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::Singular(_) | Error::NotPositiveDefinite { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
