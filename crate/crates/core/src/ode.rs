//! Explicit Runge–Kutta integrators for two-component complex systems.
//!
//! The adaptive path is the Dormand–Prince 5(4) pair with local
//! extrapolation. Both methods land exactly on every requested output time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, IntegrationError, Result};
use crate::model::{FieldParams, TracerFlags};

pub type State = [Complex64; 2];

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &State) -> State;
}

impl<F: Fn(f64, &State) -> State> OdeSystem for F {
    fn rhs(&self, t: f64, y: &State) -> State {
        self(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AdaptiveEmbeddedRk,
    FixedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step cap; for [`Method::FixedRk4`] the step actually taken is the
    /// largest one not above this that divides each output interval evenly.
    pub max_step: f64,
    pub method: Method,
    pub max_steps: u64,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Lab-frame and rotating-frame states turn at about `ω₁` for the whole
/// period, so their norm drift grows with `ω₁/ω₀`; one more digit keeps it
/// below `10⁻⁹` per period down to `ω₀/ω₁ = 10⁻³`.
pub const OSCILLATING_FRAME_TOLERANCE: f64 = 1e-13;
const STEP_CAP_FACTOR: f64 = 0.05;

impl IntegratorConfig {
    /// Default adaptive configuration for `params`, with the step capped at
    /// `0.05 / max(Γ, ω₁, ω₀)` so that the `e^{±2iω₁t}` couplings are
    /// resolved.
    pub fn for_params(params: &FieldParams, flags: &TracerFlags) -> Self {
        let fastest = analytic::gamma(params, flags)
            .gamma
            .max(params.omega1())
            .max(params.omega0());
        Self {
            rel_tol: DEFAULT_TOLERANCE,
            abs_tol: DEFAULT_TOLERANCE,
            max_step: STEP_CAP_FACTOR / fastest,
            method: Method::AdaptiveEmbeddedRk,
            max_steps: 100_000_000,
        }
    }

    /// Default configuration for the lab-frame Schrödinger equation.
    pub fn for_lab_frame(params: &FieldParams) -> Self {
        Self::for_rotating_frame(params, &TracerFlags::FULL)
    }

    /// Default configuration for the rotating-frame equations.
    pub fn for_rotating_frame(params: &FieldParams, flags: &TracerFlags) -> Self {
        let tol = OSCILLATING_FRAME_TOLERANCE;
        Self::for_params(params, flags).with_tolerances(tol, tol)
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    /// Tolerances in `(0, 1e-3]` and `max_step ≤ 0.05·min(1/ω₁, 1/ω₀)`.
    pub fn validate(&self, params: &FieldParams) -> Result<()> {
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {tol:e} outside (0, 1e-3]"
                )));
            }
        }
        let fastest = params.omega1().max(params.omega0());
        let cap = STEP_CAP_FACTOR / fastest;
        if !(self.max_step > 0.0 && self.max_step <= cap * (1.0 + 1e-12)) {
            return Err(Error::InvalidConfig(format!(
                "max_step = {:e} outside (0, {cap:e}]",
                self.max_step
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Integrate from `times[0]` and return the state at every entry of `times`.
pub fn solve<S: OdeSystem>(
    system: &S,
    y0: State,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<State>, IntegrationError> {
    match cfg.method {
        Method::AdaptiveEmbeddedRk => DormandPrince::new(system, cfg)?.run(y0, times),
        Method::FixedRk4 => Ok(rk4_run(system, y0, times, cfg.max_step)),
    }
}

#[inline]
fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (coef, k) in terms {
        let c = h * coef;
        out[0] += k[0] * c;
        out[1] += k[1] * c;
    }
    out
}

fn rk4_run<S: OdeSystem>(system: &S, y0: State, times: &[f64], max_step: f64) -> Vec<State> {
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0;
    out.push(y);
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let n = ((span / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        let h = span / n as f64;
        for i in 0..n {
            let t = w[0] + h * i as f64;
            let k1 = system.rhs(t, &y);
            let k2 = system.rhs(t + 0.5 * h, &axpy(&y, h, &[(0.5, &k1)]));
            let k3 = system.rhs(t + 0.5 * h, &axpy(&y, h, &[(0.5, &k2)]));
            let k4 = system.rhs(t + h, &axpy(&y, h, &[(1.0, &k3)]));
            y = axpy(
                &y,
                h,
                &[
                    (1.0 / 6.0, &k1),
                    (1.0 / 3.0, &k2),
                    (1.0 / 3.0, &k3),
                    (1.0 / 6.0, &k4),
                ],
            );
        }
        out.push(y);
    }
    out
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

struct DormandPrince<'a, S> {
    system: &'a S,
    cfg: &'a IntegratorConfig,
}

impl<'a, S: OdeSystem> DormandPrince<'a, S> {
    fn new(system: &'a S, cfg: &'a IntegratorConfig) -> Result<Self, IntegrationError> {
        // Below a few ulps the error estimate is pure rounding noise.
        if cfg.rel_tol.max(cfg.abs_tol) < 4.0 * f64::EPSILON {
            return Err(IntegrationError::ToleranceNotAchievable {
                rel_tol: cfg.rel_tol,
                abs_tol: cfg.abs_tol,
            });
        }
        Ok(Self { system, cfg })
    }

    fn error_norm(&self, y: &State, y_new: &State, err: &State) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            let scale = self.cfg.abs_tol + self.cfg.rel_tol * y[i].norm().max(y_new[i].norm());
            acc += (err[i].norm() / scale).powi(2);
        }
        (acc / 2.0).sqrt()
    }

    fn initial_step(&self, t: f64, y: &State, f0: &State) -> f64 {
        let scale = |v: &State| {
            let mut acc = 0.0;
            for i in 0..2 {
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].norm();
                acc += (v[i].norm() / sc).powi(2);
            }
            (acc / 2.0).sqrt()
        };
        let d0 = scale(y);
        let d1 = scale(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(self.cfg.max_step);
        let y1 = axpy(y, h0, &[(1.0, f0)]);
        let f1 = self.system.rhs(t + h0, &y1);
        let diff = [f1[0] - f0[0], f1[1] - f0[1]];
        let d2 = scale(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.cfg.max_step)
    }

    fn run(&self, y0: State, times: &[f64]) -> Result<Vec<State>, IntegrationError> {
        let mut out = Vec::with_capacity(times.len());
        let mut y = y0;
        out.push(y);
        let Some(&t0) = times.first() else {
            return Ok(out);
        };
        let mut t = t0;
        let mut k1 = self.system.rhs(t, &y);
        let mut h = self.initial_step(t, &y, &k1);
        let mut steps: u64 = 0;
        let mut last_rejected = false;

        for &target in &times[1..] {
            while t < target {
                if steps >= self.cfg.max_steps {
                    return Err(IntegrationError::MaxStepsExceeded {
                        t,
                        max_steps: self.cfg.max_steps,
                    });
                }
                let remaining = target - t;
                let landing = h >= remaining * (1.0 - 1e-12);
                let h_try = if landing { remaining } else { h };
                if h_try < 16.0 * f64::EPSILON * t.abs().max(1.0) {
                    return Err(IntegrationError::StepSizeUnderflow { t, h: h_try });
                }

                let s = self.system;
                let k2 = s.rhs(t + C2 * h_try, &axpy(&y, h_try, &[(A21, &k1)]));
                let k3 = s.rhs(t + C3 * h_try, &axpy(&y, h_try, &[(A31, &k1), (A32, &k2)]));
                let k4 = s.rhs(
                    t + C4 * h_try,
                    &axpy(&y, h_try, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
                );
                let k5 = s.rhs(
                    t + C5 * h_try,
                    &axpy(&y, h_try, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
                );
                let k6 = s.rhs(
                    t + h_try,
                    &axpy(
                        &y,
                        h_try,
                        &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                    ),
                );
                let y_new = axpy(
                    &y,
                    h_try,
                    &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
                );
                let t_new = if landing { target } else { t + h_try };
                let k7 = s.rhs(t_new, &y_new);
                let err = axpy(
                    &[Complex64::default(); 2],
                    h_try,
                    &[
                        (E1, &k1),
                        (E3, &k3),
                        (E4, &k4),
                        (E5, &k5),
                        (E6, &k6),
                        (E7, &k7),
                    ],
                );
                let err_norm = self.error_norm(&y, &y_new, &err);
                if !err_norm.is_finite() {
                    return Err(IntegrationError::NonFinite { t });
                }
                steps += 1;

                let fac = if err_norm == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err_norm.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                if err_norm <= 1.0 {
                    t = t_new;
                    y = y_new;
                    k1 = k7;
                    let fac = if last_rejected { fac.min(1.0) } else { fac };
                    // A step clipped to land on an output time says nothing
                    // about the natural step size, so keep the old proposal.
                    let grown = (h_try * fac).min(self.cfg.max_step);
                    h = if landing { h.max(grown) } else { grown };
                    last_rejected = false;
                } else {
                    h = h_try * fac.min(1.0);
                    last_rejected = true;
                }
            }
            out.push(y);
        }
        Ok(out)
    }
}
