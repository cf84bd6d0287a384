use nalgebra::DVector;
use thiserror::Error;

/// Errors produced by the integrator toolkit.
#[derive(Debug, Error)]
pub enum PviError {
    /// The two-form -d(theta) is degenerate (or numerically so) at a point.
    #[error("symplectic form singular at z = {point:?} (rcond = {rcond:.3e})")]
    SingularForm { point: Vec<f64>, rcond: f64 },

    /// No analytic gradient was supplied and a finite-difference one could
    /// not be formed (non-finite samples).
    #[error("gradient unavailable: {0}")]
    GradientUnavailable(String),

    /// The rotor closed-form discrete Lagrangian contains 1/sqrt(epsilon).
    #[error("closed-form L-infinity requires epsilon > 0")]
    EpsilonZero,

    /// Newton iteration exhausted its budget. Carries the best iterate seen.
    #[error("Newton failed to converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: DVector<f64>,
    },

    /// The Newton linear solve hit a (numerically) singular Jacobian.
    #[error("singular Jacobian in Newton solve at iteration {iteration}")]
    SingularJacobian { iteration: usize },

    /// The adaptive reference integrator rejected too many steps in a row.
    #[error("reference integrator step failure at t = {t}")]
    StepFailure { t: f64 },

    #[error("unknown builtin system `{0}`")]
    UnknownSystem(String),

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, PviError>;
