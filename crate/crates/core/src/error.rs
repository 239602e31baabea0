use thiserror::Error;

#[derive(Debug, Error)]
pub enum GsrError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("no connected graph after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("graph is disconnected (λ₂ = 0)")]
    Disconnected,

    #[error("nodes {0} and {1} have identical coordinates")]
    DuplicateCoordinates(usize, usize),

    #[error("signal has zero energy")]
    ZeroSignal,

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("ill-conditioned matrix (condition number {0:e})")]
    IllConditioned(f64),

    #[error("solver did not converge after {iterations} iterations (primal residual {primal_residual:e}, dual residual {dual_residual:e})")]
    SolverNotConverged {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Conic(#[from] gsr_conic::ConicError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GsrError>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(GsrError::DimensionMismatch { what, expected, found })
    }
}
