use thiserror::Error;

/// Errors surfaced by problem assembly, solvers and the instance/trace IO.
#[derive(Debug, Error)]
pub enum SolverError {
    /// The problem description is inconsistent or unsupported.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// A caller-supplied argument violates an operation's contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A solve produced non-finite values or an unbounded subproblem.
    #[error("numeric failure at iteration {iter}: {msg}")]
    Numeric { iter: u64, msg: String },

    /// Spectral-norm estimation did not settle within the iteration cap.
    #[error("power iteration did not converge within {0} iterations")]
    PowerIteration(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A manifest, matrix or trace file could not be parsed.
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, SolverError>;
