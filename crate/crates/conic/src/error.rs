use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("variable index {index} out of range for a problem with {n_vars} variables")]
    VariableOutOfRange { index: usize, n_vars: usize },
    #[error("invalid solver setting: {0}")]
    InvalidSettings(String),
    #[error("KKT factorization failed (block of size {block_size})")]
    Factorization { block_size: usize },
    #[error("iterates became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
}
