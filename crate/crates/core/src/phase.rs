//! Phases, Rabi-frequency contributions and power-law fits.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, AdiabaticEvolution, ExactEvolution};
use crate::error::{Error, Result};
use crate::model::{FieldParams, Level, TracerFlags};
use crate::numeric;
use crate::ode::IntegratorConfig;
use crate::trajectory::{phase_tracking_grid, Trajectory};

const TWO_PI: f64 = 2.0 * PI;

/// Population left in the other eigenstate above which a numerically
/// extracted geometric phase is flagged.
pub const LEAKAGE_THRESHOLD: f64 = 0.1;

/// Principal value in `(−π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TWO_PI);
    if p > PI {
        p - TWO_PI
    } else {
        p
    }
}

/// Remove `2π` jumps between consecutive samples.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut correction = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phases {
        if let Some(q) = prev {
            let jump = p - q;
            let mut principal = (jump + PI).rem_euclid(TWO_PI) - PI;
            // keep a jump of exactly +π positive
            if principal == -PI && jump > 0.0 {
                principal = PI;
            }
            correction += principal - jump;
        }
        out.push(p + correction);
        prev = Some(p);
    }
    out
}

/// Continuous phase of `z(t)/z(0)` along a sampled series.
pub fn accumulated_phase(values: impl IntoIterator<Item = Complex64>) -> Vec<f64> {
    let mut iter = values.into_iter();
    let Some(first) = iter.next() else {
        return Vec::new();
    };
    let reference = first.conj();
    let wrapped: Vec<f64> = std::iter::once(0.0)
        .chain(iter.map(|z| (z * reference).arg()))
        .collect();
    unwrap_phases(&wrapped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BerryRoute {
    AdiabaticClosedForm,
    ExactClosedForm,
    NumericLab,
}

impl BerryRoute {
    pub const ALL: [BerryRoute; 3] = [
        BerryRoute::AdiabaticClosedForm,
        BerryRoute::ExactClosedForm,
        BerryRoute::NumericLab,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BerryRoute::AdiabaticClosedForm => "adiabatic-closed-form",
            BerryRoute::ExactClosedForm => "exact-closed-form",
            BerryRoute::NumericLab => "numeric-lab",
        }
    }
}

impl fmt::Display for BerryRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BerryRoute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adiabatic-closed-form" | "adiabatic" => Ok(BerryRoute::AdiabaticClosedForm),
            "exact-closed-form" | "exact" => Ok(BerryRoute::ExactClosedForm),
            "numeric-lab" => Ok(BerryRoute::NumericLab),
            other => Err(format!("unknown route '{other}'")),
        }
    }
}

/// Phase bookkeeping of one eigenstate carried around one drive period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub state: Level,
    pub route: BerryRoute,
    pub theta: f64,
    pub ratio: f64,
    pub period: f64,
    /// Unwrapped phase of `cₙ(T)/cₙ(0)`.
    pub total_phase: f64,
    /// `−EₙT`.
    pub dynamical_phase: f64,
    /// `total_phase` reduced to `(−π, π]`.
    pub geometric_phase: f64,
    /// `|cₘ(T)|`, `m ≠ n`.
    pub residual_mixing: f64,
    pub leakage_warning: bool,
}

impl PhaseReport {
    /// Phase of the lab-frame state relative to its start: geometric plus
    /// dynamical.
    pub fn lab_phase(&self) -> f64 {
        self.total_phase + self.dynamical_phase
    }
}

/// Geometric phase of the adiabatic solution after one period:
/// `−2πD² = −π(1 + cosθ)` for the lower state, `−2πA² = −π(1 − cosθ)` for
/// the upper one, reduced to `(−π, π]`.
pub fn expected_geometric_phase(theta: f64, state: Level) -> f64 {
    let c = theta.cos();
    wrap_phase(match state {
        Level::Lower => -PI * (1.0 + c),
        Level::Upper => -PI * (1.0 - c),
    })
}

pub fn berry_phase(params: &FieldParams, state: Level, route: BerryRoute) -> Result<PhaseReport> {
    let cfg = IntegratorConfig::for_lab_frame(params);
    berry_phase_with(params, state, route, &cfg)
}

/// [`berry_phase`] with an explicit integrator configuration for the
/// numeric route.
pub fn berry_phase_with(
    params: &FieldParams,
    state: Level,
    route: BerryRoute,
    cfg: &IntegratorConfig,
) -> Result<PhaseReport> {
    if params.omega0() == 0.0 {
        return Err(Error::RouteUnavailable(
            "a static field never completes a period".into(),
        ));
    }
    let flags = TracerFlags::FULL;
    let period = params.period();
    let fastest = analytic::gamma(params, &flags)
        .gamma
        .max(params.omega1())
        .max(params.omega0());
    let grid = phase_tracking_grid(period, fastest);
    let c0 = state.initial_coefficients();
    let traj: Trajectory = match route {
        BerryRoute::AdiabaticClosedForm => {
            AdiabaticEvolution::new(params, &flags).trajectory(&c0, &grid)?
        }
        BerryRoute::ExactClosedForm => {
            ExactEvolution::new(params, &flags).trajectory(&c0, &grid)?
        }
        BerryRoute::NumericLab => numeric::lab_route_coefficients(params, &c0, &grid, cfg)?,
    };
    let phases = accumulated_phase(traj.samples().iter().map(|c| c.get(state)));
    let total_phase = *phases.last().expect("non-empty grid");
    let (_, last) = traj.last().expect("non-empty grid");
    let residual_mixing = last.get(state.other()).norm().min(1.0);
    Ok(PhaseReport {
        state,
        route,
        theta: params.theta(),
        ratio: params.ratio(),
        period,
        total_phase,
        dynamical_phase: -state.energy(params) * period,
        geometric_phase: wrap_phase(total_phase),
        residual_mixing,
        leakage_warning: residual_mixing > LEAKAGE_THRESHOLD,
    })
}

/// Contributions of the diagonal and off-diagonal terms to `Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RabiDecomposition {
    pub gamma: f64,
    /// `Γ` with the off-diagonal tracer set to zero.
    pub gamma_decoupled: f64,
    pub gamma_aa: f64,
    /// `Γ − Γ(a=0)`.
    pub nondiagonal: f64,
    /// `Γ(a=0) − ω₁`.
    pub diagonal: f64,
    pub nondiagonal_rel: f64,
    pub diagonal_rel: f64,
}

pub fn rabi_decomposition(params: &FieldParams, flags: &TracerFlags) -> RabiDecomposition {
    let full = analytic::gamma(params, flags);
    let decoupled = analytic::gamma(params, &flags.with_offdiagonal(0.0));
    let w1 = params.omega1();
    let nondiagonal = full.gamma - decoupled.gamma;
    let diagonal = decoupled.gamma - w1;
    RabiDecomposition {
        gamma: full.gamma,
        gamma_decoupled: decoupled.gamma,
        gamma_aa: full.gamma_aa,
        nondiagonal,
        diagonal,
        nondiagonal_rel: nondiagonal / w1,
        diagonal_rel: diagonal / w1,
    }
}

/// Ordinary least squares of `log(error)` against `log(ratio)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    /// Sorted decreasing.
    pub ratios: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ScalingFit {
    pub fn predict(&self, ratio: f64) -> f64 {
        (self.intercept + self.slope * ratio.ln()).exp()
    }
}

pub const MIN_FIT_POINTS: usize = 4;

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "need at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    if let Some(&(r, e)) = points
        .iter()
        .find(|(r, e)| !(r.is_finite() && e.is_finite() && *r > 0.0 && *e > 0.0))
    {
        return Err(Error::Fit(format!(
            "non-positive or non-finite point ({r}, {e})"
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Fit("duplicate ratio".into()));
    }

    let n = sorted.len() as f64;
    let xs: Vec<f64> = sorted.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(ScalingFit {
        ratios: sorted.iter().map(|p| p.0).collect(),
        errors: sorted.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wrapping() {
        assert_eq!(wrap_phase(PI), PI);
        assert_abs_diff_eq!(wrap_phase(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(-7.0), -7.0 + TWO_PI, epsilon = 1e-15);
        assert_eq!(wrap_phase(0.0), 0.0);
    }

    #[test]
    fn unwrap_recovers_ramp() {
        let ramp: Vec<f64> = (0..200).map(|k| -0.3 * k as f64).collect();
        let wrapped: Vec<f64> = ramp.iter().map(|&p| wrap_phase(p)).collect();
        let back = unwrap_phases(&wrapped);
        for (a, b) in ramp.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn accumulated_phase_of_rotor() {
        let phases =
            accumulated_phase((0..=100).map(|k| Complex64::from_polar(2.0, 0.5 + 0.2 * k as f64)));
        assert_abs_diff_eq!(phases[100], 20.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_power_laws() {
        for (c, p) in [(3.0, 2.0), (0.7, 1.0), (1e-3, 4.0)] {
            let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.02, 0.01, 0.001]
                .iter()
                .map(|&r: &f64| (r, c * r.powf(p)))
                .collect();
            let fit = fit_scaling(&pts).unwrap();
            assert!((fit.slope - p).abs() < 1e-6);
            assert!((fit.intercept - c.ln()).abs() < 1e-6);
            assert!(fit.r_squared > 1.0 - 1e-12);
        }
    }

    #[test]
    fn fit_rejections() {
        assert!(fit_scaling(&[(0.1, 1.0), (0.01, 1.0), (0.001, 1.0)]).is_err());
        assert!(fit_scaling(&[(0.1, 1.0), (0.01, 0.0), (0.001, 1.0), (1e-4, 1.0)]).is_err());
        assert!(fit_scaling(&[(0.1, 1.0), (-0.01, 1.0), (0.001, 1.0), (1e-4, 1.0)]).is_err());
        assert!(fit_scaling(&[(0.1, 1.0), (0.1, 2.0), (0.001, 1.0), (1e-4, 1.0)]).is_err());
    }

    #[test]
    fn equator_has_no_diagonal_contribution() {
        let p = FieldParams::from_ratio(PI / 2.0, 0.1, 1.0).unwrap();
        let d = rabi_decomposition(&p, &TracerFlags::FULL);
        assert!(d.diagonal.abs() < 1e-15);
        assert!(d.nondiagonal > 1e-4);
    }

    #[test]
    fn static_field_has_no_berry_route() {
        let p = FieldParams::new(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            berry_phase(&p, Level::Lower, BerryRoute::AdiabaticClosedForm),
            Err(Error::RouteUnavailable(_))
        ));
    }

    #[test]
    fn route_names_round_trip() {
        for r in BerryRoute::ALL {
            assert_eq!(r.as_str().parse::<BerryRoute>().unwrap(), r);
        }
    }

    proptest! {
        #[test]
        fn wrap_is_principal_and_congruent(x in -1e4f64..1e4) {
            let w = wrap_phase(x);
            prop_assert!(w > -PI && w <= PI);
            let k = (x - w) / TWO_PI;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }

        #[test]
        fn fit_recovers_any_power_law(c in 1e-3f64..1e3, p in -3.0f64..5.0) {
            let pts: Vec<(f64, f64)> = (0..6).map(|k| {
                let r = 10f64.powf(-0.5 * k as f64);
                (r, c * r.powf(p))
            }).collect();
            let fit = fit_scaling(&pts).unwrap();
            prop_assert!((fit.slope - p).abs() < 1e-6);
        }
    }
}
