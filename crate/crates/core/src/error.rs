use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("column {0} has (near) zero norm")]
    ZeroColumn(usize),

    #[error("dictionary column {col} is not unit norm (norm {norm})")]
    NonUnitDictionary { col: usize, norm: f64 },

    #[error("vector is not unit norm (norm {0})")]
    NonUnitVector(f64),

    #[error("invalid sparse entry: {0}")]
    InvalidEntry(String),

    #[error("{nnz} nonzeros exceed the global budget {budget}")]
    BudgetExceeded { nnz: usize, budget: usize },

    #[error("global budget {budget} exceeds the {capacity} available coefficient slots")]
    BudgetTooLarge { budget: usize, capacity: usize },

    #[error("brute-force search over {count} supports exceeds the cap of {cap}")]
    TooLarge { count: u128, cap: u128 },

    #[error("matrix has (near) zero Frobenius norm")]
    ZeroMatrix,

    #[error("degenerate direction: ||E w|| = {0}")]
    DegenerateDirection(f64),

    #[error("gram matrix is singular")]
    SingularGram,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("dictionary has no columns")]
    EmptyDictionary,

    #[error("image {height}x{width} is smaller than the {side}x{side} patch")]
    ImageTooSmall {
        height: usize,
        width: usize,
        side: usize,
    },

    #[error("pixel ({row}, {col}) is not covered by any patch")]
    UncoveredPixel { row: usize, col: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("pixel value {value} at ({row}, {col}) is outside [0, 255]")]
    OutOfRange { row: usize, col: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
