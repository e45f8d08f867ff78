use thiserror::Error;

/// Library-wide error type. Variants map one-to-one onto CLI exit codes:
/// usage errors exit 1, convergence failures exit 2, domain and grid
/// violations exit 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid arguments or configuration.
    #[error("usage: {0}")]
    Usage(String),
    /// An iterative scheme failed to reach its tolerance within its budget.
    #[error("convergence: {0}")]
    Convergence(String),
    /// Input outside the mathematical domain of the operation.
    #[error("domain: {0}")]
    Domain(String),
    /// Grid construction or stencil placement violates a precondition.
    #[error("grid: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
