use thiserror::Error;

use crate::nlsolve::SolveReport;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The kinematics precondition `|s v| < 1` failed at `stage`.
    #[error("kinematics domain violated at stage {stage}: |s v| = {value} >= 1")]
    DomainViolation { stage: usize, value: f64 },

    /// `exp^{-1}` was requested on the cut of the restricted chart (trace -2).
    #[error("logarithm undefined on the chart cut (trace = -2)")]
    ChartViolation,

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("singular Jacobian at iteration {iteration} (pivot {pivot:e})")]
    SingularJacobian { iteration: usize, pivot: f64 },

    #[error("solver did not converge: {}", .0.termination)]
    NotConverged(Box<SolveReport>),

    /// `L_k <= 0` in the game Riccati recursion: no saddle point exists.
    #[error("LQ game ill-posed at stage {stage}: L = {value}")]
    GameIllPosed { stage: usize, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("matrix is not a rotation (orthogonality defect {defect:e}, det {det})")]
    NotARotation { defect: f64, det: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Re-tags a domain violation with the stage at which it occurred.
    pub(crate) fn at_stage(self, k: usize) -> Self {
        match self {
            Error::DomainViolation { value, .. } => Error::DomainViolation { stage: k, value },
            other => other,
        }
    }
}
