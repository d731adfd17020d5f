use thiserror::Error;

/// Errors raised by the decomposition toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input-tree: {0}")]
    InvalidTree(String),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("tree notation parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("no decompositions exist for a system with {m} input(s)")]
    NoDecompositions { m: usize },

    #[error("enumeration refused: {count} decompositions exceed the cap of {cap}")]
    EnumerationCap { count: String, cap: u64 },

    #[error("goal is not an equilibrium: trim residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotAnEquilibrium { residual: f64, tolerance: f64 },

    #[error("the pair (A - lambda/2 I, B) is not stabilizable: {0}")]
    Unstabilizable(String),

    #[error("Lyapunov solve failed: {0}")]
    Lyapunov(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("dynamics evaluation failed: {0}")]
    Dynamics(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("policy file: {0}")]
    PolicyFormat(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
