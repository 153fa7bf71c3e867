use thiserror::Error;

/// Errors surfaced by the library.
///
/// The variants partition failures by who is at fault: `Config` and
/// `Argument` are caller mistakes, `Feasibility` means an input violated a
/// documented constraint of the problem being evaluated, and the remaining
/// variants are runtime failures of the numerics themselves.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or unsupported configuration (dimension mismatches,
    /// unsupported patch geometry for a fast path, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A scalar or array argument is out of its documented range.
    #[error("argument error: {0}")]
    Argument(String),

    /// An input violates a feasibility constraint of the objective
    /// (sparsity budget exceeded, energy cap exceeded, non-unitary
    /// transform where one is required, singular transform).
    #[error("infeasible input: {0}")]
    Feasibility(String),

    /// Numerical breakdown: a quantity that must be positive or finite
    /// came out otherwise.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iterative sub-solver exhausted its iteration budget.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// The requested operation exceeds a hard size guard.
    #[error("capability exceeded: {0}")]
    Capability(String),

    /// A run-time invariant of the descent loop was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
