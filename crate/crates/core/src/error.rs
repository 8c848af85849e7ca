use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("tensor is not in the free nilpotent Lie algebra (residual {residual:.3e})")]
    NotLie { residual: f64 },

    #[error("constraint infeasible at this resolution (best residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("covariance matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("time {0} is not a grid point")]
    OffGrid(f64),

    #[error("Hörmander condition fails at {point:?}")]
    Hormander { point: Vec<f64> },

    #[error("tail truncation error {estimate:.3e} above tolerance; enlarge the truncation horizon")]
    Truncation { estimate: f64 },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
