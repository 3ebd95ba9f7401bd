use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the pipeline.
///
/// Variants are grouped by the process exit code they map to, see
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("record '{record}': symbol '{symbol}' at position {position} is not in the alphabet")]
    UnknownSymbol {
        record: String,
        position: usize,
        symbol: char,
    },

    #[error("duplicate id '{0}'")]
    DuplicateId(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("sequence '{id}' has length {len}, shorter than the required {required}")]
    SequenceTooShort {
        id: String,
        len: usize,
        required: usize,
    },

    #[error("vector has zero norm")]
    ZeroNorm,

    #[error("negative entry {value} at feature index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("kernel entry ({i}, {j}): {source}")]
    KernelEntry {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("clusters {0} and {1} have coincident centroids")]
    CoincidentCentroids(usize, usize),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Process exit code: 2 usage, 3 input, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) => 2,
            Error::ZeroNorm
            | Error::CoincidentCentroids(..)
            | Error::Numeric(_) => 4,
            Error::KernelEntry { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
