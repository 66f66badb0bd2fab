use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate element: det DF = {det:e} at reference point {point:?}")]
    DegenerateElement { det: f64, point: Vec<f64> },

    #[error("mesh generation failed at cell {cell}: {reason}")]
    MeshGeneration { cell: usize, reason: String },

    #[error("mesh structure error: {0}")]
    Structure(String),

    #[error("coefficient error: {0}")]
    Coefficient(String),

    #[error("quadrature variant error: {0}")]
    Variant(String),

    #[error("velocity elimination failed: block of vertex {vertex} is singular")]
    Elimination { vertex: usize },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error(
        "Newton iteration did not converge in {iterations} iterations at step {step}; residual history {history:?}"
    )]
    NonConvergence {
        step: usize,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("random field sampling failed: {0}")]
    Sampling(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(String),
}

/// Coarse error category, used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Solver,
    Io,
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Parameter(_) => ErrorCategory::Config,
            Error::Io { .. } | Error::Csv(_) => ErrorCategory::Io,
            _ => ErrorCategory::Solver,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Config => 2,
            ErrorCategory::Solver => 3,
            ErrorCategory::Io => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
