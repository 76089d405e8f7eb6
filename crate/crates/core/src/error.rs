use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("metric is not positive definite at node {node}")]
    NotPositiveDefinite { node: usize },

    #[error("singular metric: {0}")]
    Singular(String),

    #[error(
        "neumann condition violated: measured normal derivative {measured:e} exceeds {tolerance:e}"
    )]
    NeumannViolated { measured: f64, tolerance: f64 },

    #[error("singular time reached at t = {t:.6e}: {reason} (node {node})")]
    SingularTime { t: f64, node: usize, reason: String },

    #[error("boundary condition drift: |H| = {h:e} at t = {t:.6e}")]
    BoundaryDrift { t: f64, h: f64 },

    #[error("solver did not converge after {iterations} iterations (el residual {el_residual:e}, norm residual {norm_residual:e})")]
    NotConverged {
        iterations: usize,
        el_residual: f64,
        norm_residual: f64,
    },

    #[error("positivity lost: damping floor reached at iteration {iteration}")]
    PositivityLost { iteration: usize },

    #[error("not a Yamabe metric: {0}")]
    NotYamabeMetric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidInput(msg.into())
    }
}
