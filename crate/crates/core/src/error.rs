use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("level mismatch: {0}")]
    LevelMismatch(String),

    #[error("invalid index {index} (limit {limit})")]
    InvalidIndex { index: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular system ({context})")]
    Singular { context: String },

    #[error("linear solver did not reach tolerance ({context}): residual {residual:.3e} > {tolerance:.3e}")]
    SolverTolerance {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("phase alignment undefined: inputs are L2-orthogonal")]
    AlignmentUndefined,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bad field file {path:?}: {msg}")]
    FieldFile { path: PathBuf, msg: String },

    #[error("malformed csv at row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
