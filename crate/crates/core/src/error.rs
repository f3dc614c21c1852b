use thiserror::Error;

pub type Result<T, E = MrqError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MrqError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot quantize a zero vector")]
    ZeroVector,

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("unsupported file: expected magic {expected:?} version {expected_version}, found {found:?} version {found_version}")]
    VersionMismatch {
        expected: String,
        expected_version: u32,
        found: String,
        found_version: u32,
    },

    #[error("record {record} has dimension {got}, expected {expected}")]
    InconsistentDimension {
        record: usize,
        expected: usize,
        got: usize,
    },

    #[error("query {index}: {source}")]
    Query {
        index: usize,
        #[source]
        source: Box<MrqError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MrqError {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        MrqError::Format {
            offset: offset as u64,
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        MrqError::InvalidConfig(message.into())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(MrqError::DimensionMismatch { expected, got })
    }
}
