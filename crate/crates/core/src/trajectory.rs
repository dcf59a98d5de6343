use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoefficientPair, FieldParams};

/// Representation the samples of a [`Trajectory`] are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// `cₙ(t)` of the instantaneous-eigenbasis expansion.
    InstantaneousBasis,
    /// `X₁ = c₁e^{iω₁t}`, `X₂ = c₂e^{−iω₁t}`.
    Rotating,
    /// Spinor components on `(|↑⟩, |↓⟩)`.
    LabSpinor,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::InstantaneousBasis => "instantaneous-basis",
            Frame::Rotating => "rotating",
            Frame::LabSpinor => "lab-spinor",
        })
    }
}

/// Which evaluation path produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Exact,
    Adiabatic,
    NumericOde,
    NumericLab,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Exact => "exact",
            SolverKind::Adiabatic => "adiabatic",
            SolverKind::NumericOde => "numeric-ode",
            SolverKind::NumericLab => "numeric-lab",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    samples: Vec<CoefficientPair>,
    frame: Frame,
    solver: SolverKind,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        samples: Vec<CoefficientPair>,
        frame: Frame,
        solver: SolverKind,
    ) -> Result<Self> {
        if times.len() != samples.len() {
            return Err(Error::InvalidTimeGrid(format!(
                "{} times but {} samples",
                times.len(),
                samples.len()
            )));
        }
        validate_grid(&times)?;
        Ok(Self {
            times,
            samples,
            frame,
            solver,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[CoefficientPair] {
        &self.samples
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn solver(&self) -> SolverKind {
        self.solver
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &CoefficientPair)> {
        self.times.iter().copied().zip(self.samples.iter())
    }

    pub fn last(&self) -> Option<(f64, &CoefficientPair)> {
        self.iter().last()
    }

    /// Largest `| |c₁|² + |c₂|² − 1 |` along the trajectory.
    pub fn max_norm_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|c| (c.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise maximum distance to another trajectory on the same grid.
    pub fn max_deviation(&self, other: &Trajectory) -> Result<f64> {
        if self.frame != other.frame {
            return Err(Error::FrameMismatch {
                expected: self.frame,
                found: other.frame,
            });
        }
        if self.times != other.times {
            return Err(Error::InvalidTimeGrid(
                "trajectories sampled on different grids".into(),
            ));
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max))
    }

    pub(crate) fn map_samples(
        &self,
        frame: Frame,
        f: impl Fn(f64, &CoefficientPair) -> CoefficientPair,
    ) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            samples: self.iter().map(|(t, c)| f(t, c)).collect(),
            frame,
            solver: self.solver,
        }
    }
}

/// Sample times must be finite and strictly increasing.
pub fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidTimeGrid("empty grid".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidTimeGrid("non-finite time".into()));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidTimeGrid(format!(
            "times not strictly increasing: {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// `n + 1` equally spaced times on `[0, t_end]`, endpoints exact.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    assert!(n > 0, "uniform_grid needs at least one interval");
    (0..=n)
        .map(|k| {
            if k == n {
                t_end
            } else {
                t_end * k as f64 / n as f64
            }
        })
        .collect()
}

/// `samples_per_period` points per drive period over `periods` periods.
pub fn period_grid(
    params: &FieldParams,
    periods: u32,
    samples_per_period: usize,
) -> Result<Vec<f64>> {
    if params.omega0() == 0.0 {
        return Err(Error::InvalidTimeGrid(
            "static field has no drive period".into(),
        ));
    }
    if periods == 0 || samples_per_period == 0 {
        return Err(Error::InvalidTimeGrid(
            "periods and samples per period must be positive".into(),
        ));
    }
    Ok(uniform_grid(
        params.period() * periods as f64,
        periods as usize * samples_per_period,
    ))
}

/// Grid on `[0, t_end]` fine enough to follow every phase continuously:
/// spacing at most `0.1 / fastest`.
pub fn phase_tracking_grid(t_end: f64, fastest: f64) -> Vec<f64> {
    let n = ((t_end * fastest / 0.1).ceil() as usize).max(16);
    uniform_grid(t_end, n)
}
