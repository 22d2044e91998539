use thiserror::Error;

/// Errors surfaced by the geometry pipeline.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular chart: {0}")]
    SingularChart(String),

    #[error("excluded set: {0}")]
    ExcludedSet(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("focal point: det(B) = {det:.3e} at r = {r}")]
    FocalPoint { r: f64, det: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
