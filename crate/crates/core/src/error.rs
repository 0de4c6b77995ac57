use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient bound states: found {found}, need {needed}")]
    InsufficientBoundStates { found: usize, needed: usize },

    #[error("eigensolver did not converge (residual norm {residual:.3e})")]
    EigenNotConverged { residual: f64 },

    #[error("quadrature did not converge: estimate {estimate:.6e}, error {error:.3e}")]
    QuadratureNotConverged { estimate: f64, error: f64 },

    #[error("transition frequency {omega:.4} rad/ps is outside the spectral table (max {omega_max:.4}); rebuild the tables with a larger omega_max")]
    OmegaOutOfRange { omega: f64, omega_max: f64 },

    #[error("density matrix lost positivity at t = {t:.4} ps (min eigenvalue {min_eig:.3e}, step {step:.3e} ps)")]
    PositivityViolation { t: f64, min_eig: f64, step: f64 },

    #[error("step size underflow at t = {t:.4} ps (h = {step:.3e} ps)")]
    StepUnderflow { t: f64, step: f64 },

    #[error("step budget of {steps} exhausted at t = {t:.4} ps")]
    StepBudget { t: f64, steps: u64 },

    #[error("target not bracketed: {0}")]
    NotBracketed(String),

    #[error("insufficient overlap of rescaled speed ranges")]
    InsufficientOverlap,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InsufficientBoundStates { .. } => "insufficient_bound_states",
            Error::EigenNotConverged { .. } => "eigen_not_converged",
            Error::QuadratureNotConverged { .. } => "quadrature_not_converged",
            Error::OmegaOutOfRange { .. } => "omega_out_of_range",
            Error::PositivityViolation { .. } => "positivity_violation",
            Error::StepUnderflow { .. } => "step_underflow",
            Error::StepBudget { .. } => "step_budget",
            Error::NotBracketed(_) => "not_bracketed",
            Error::InsufficientOverlap => "insufficient_overlap",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
