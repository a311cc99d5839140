use thiserror::Error;

/// Errors raised by the minimax toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("point is not stationary: |F| = {0:e}")]
    NotStationary(f64),
    #[error("norm matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("no sign change of the spectral abscissa on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("not a Hopf point: {0}")]
    NotHopf(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("closed form and finite-difference paths disagree: {0}")]
    ClosedFormMismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
