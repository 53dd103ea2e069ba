use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unsupported harmonic degree {degree} (maximum {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("invalid harmonic index (l = {degree}, m = {order})")]
    InvalidIndex { degree: usize, order: i64 },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("point is off the variety theta.theta = 1 (residual {residual:.3e})")]
    OffVariety { residual: f64 },

    #[error("surface violates class constraints: {0}")]
    ClassViolation(String),

    #[error("linear solve did not converge: residual {residual:.3e} > tolerance {tolerance:.3e}")]
    NonConvergence { residual: f64, tolerance: f64 },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("infeasible direction pair: 1 + t^2 - |lambda|^2/4 = {deficit:.3e} < 0")]
    InfeasiblePair { deficit: f64 },

    #[error("formula is degenerate at lambda = 0")]
    DegenerateFrequency,

    #[error("insufficient records for fit: {found} usable, {needed} needed")]
    InsufficientRecords { found: usize, needed: usize },

    #[error("solver failed for incident direction {index}: {source}")]
    IncidentDirection {
        index: usize,
        #[source]
        source: Box<LabError>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// True for errors caused by bad user input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            LabError::InvalidIndex { .. }
                | LabError::UnsupportedDegree { .. }
                | LabError::Domain(_)
                | LabError::OffVariety { .. }
                | LabError::ClassViolation(_)
                | LabError::GridMismatch(_)
                | LabError::InfeasiblePair { .. }
                | LabError::Validation(_)
                | LabError::Io(_)
                | LabError::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
