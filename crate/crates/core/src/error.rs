use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("odd operator count {0}: parity-conserving strings need an even length")]
    Parity(usize),

    #[error("index {index} out of range for {bound} modes")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("singular rank-1 update at step {step}: |1 + tr(C⁻¹B)| = {magnitude:e}")]
    SingularUpdate { step: usize, magnitude: f64 },

    #[error("singular contraction at phase vector {alpha:?}: {reason}")]
    SingularContraction { alpha: Vec<f64>, reason: String },

    #[error("covariance matrix is degenerate: smallest |eigenvalue| of iΓ is {0:e}")]
    Degenerate(f64),

    #[error("optimizer stagnated: step size fell below {dtau_min:e} without an energy decrease")]
    Stagnation { dtau_min: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("symmetry violation at (p, q, r, s) = {indices:?}: {message}")]
    Symmetry { indices: Vec<usize>, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by an unlucky trial point rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularContraction { .. } | Error::Degenerate(_) | Error::SingularUpdate { .. }
        )
    }
}
