use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("unsupported {what}: {value}")]
    Unsupported { what: &'static str, value: u64 },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("line {line}: index out of range ({index} >= {bound})")]
    IndexOutOfRange { line: usize, index: usize, bound: usize },
    #[error("line {line}: duplicate pair ({i}, {j})")]
    DuplicatePair { line: usize, i: usize, j: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("pool size {pool_size} must be smaller than point count {n}")]
    PoolTooLarge { pool_size: usize, n: usize },
    #[error("degenerate kernel row {row}: row sum is zero")]
    DegenerateRow { row: usize },
    #[error("invalid layer dims {0:?}")]
    InvalidDims(Vec<usize>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tape does not match parameters: {0}")]
    TapeMismatch(String),
    #[error("row {row} has (near) zero norm")]
    ZeroVectorRow { row: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("class {class} has no usable prompt embeddings")]
    EmptyClass { class: usize },
    #[error("non-finite loss at step {step}: {report}")]
    NonFiniteLoss { step: usize, report: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
