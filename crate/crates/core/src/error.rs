use thiserror::Error;

/// Errors shared across the crate.
///
/// Infeasibility of a well-formed instance is an `Infeasible` value (CLI
/// exit code 1); malformed input is `Invalid`/`Parse` (exit code 2); an
/// exhausted search budget is `BudgetExhausted` (exit code 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("x-ray mass mismatch: {left} vs {right}")]
    MassMismatch { left: u64, right: u64 },

    #[error("directions must be distinct")]
    IdenticalDirections,

    #[error("infeasible{}", frame.map(|f| format!(" at frame {f}")).unwrap_or_default())]
    Infeasible { frame: Option<usize> },

    #[error("search budget exhausted after {nodes} nodes")]
    BudgetExhausted { nodes: u64 },

    #[error("enumeration bounds exceeded: {0}")]
    BoundsExceeded(String),

    #[error("known positions missing at frame {frame}")]
    MissingKnownPositions { frame: usize },

    #[error("displacement field matrix is singular")]
    SingularDisplacement,

    #[error("{path}: {msg}")]
    Field { path: String, msg: String },

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn infeasible() -> Self {
        Error::Infeasible { frame: None }
    }

    pub fn infeasible_at(frame: usize) -> Self {
        Error::Infeasible { frame: Some(frame) }
    }

    pub fn field(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Field { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
