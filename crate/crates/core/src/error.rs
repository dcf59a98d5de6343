use thiserror::Error;

use crate::trajectory::Frame;

/// Failures of the ODE integrators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("tolerance not achievable: rel_tol = {rel_tol:e}, abs_tol = {abs_tol:e}")]
    ToleranceNotAchievable { rel_tol: f64, abs_tol: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: u64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

impl IntegrationError {
    /// Time at which the integration failed, if known.
    pub fn failure_time(&self) -> Option<f64> {
        match self {
            Self::StepSizeUnderflow { t, .. }
            | Self::MaxStepsExceeded { t, .. }
            | Self::NonFinite { t } => Some(*t),
            Self::ToleranceNotAchievable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("theta must lie strictly inside (0, pi), got {0}")]
    ThetaOutOfRange(f64),
    #[error("omega0 must be finite and non-negative, got {0}")]
    InvalidDriveFrequency(f64),
    #[error("omega1 must be finite and positive, got {0}")]
    InvalidSplitting(f64),
    #[error("tracer flag {name} must be finite, got {value}")]
    NonFiniteFlag { name: &'static str, value: f64 },
    #[error("coefficients are not normalized: |c1|^2 + |c2|^2 = {0}")]
    NotNormalized(f64),
    #[error("sine-term reduction needs omega0/Gamma < 1, got {0}")]
    ReductionNotMeaningful(f64),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("expected a {expected} trajectory, got {found}")]
    FrameMismatch { expected: Frame, found: Frame },
    #[error("route unavailable: {0}")]
    RouteUnavailable(String),
    #[error("scaling fit: {0}")]
    Fit(String),
    #[error("invalid sweep spec: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
