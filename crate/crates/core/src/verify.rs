//! Self-consistency checks over a fixed parameter grid.
//!
//! Each check reports its worst value and where it occurred. The report
//! always lists every check, passing or not.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{AdiabaticEvolution, ExactEvolution};
use crate::error::Result;
use crate::model::{
    coupling_identity, coupling_identity_step, eigensystem_at, hamiltonian_at, CoefficientPair,
    FieldParams, Level, TracerFlags,
};
use crate::numeric::{self, CoefficientSystem};
use crate::ode::{IntegratorConfig, OdeSystem};
use crate::phase::{self, BerryRoute};
use crate::trajectory::uniform_grid;
use crate::Complex64;

pub const THETAS: [f64; 4] = [PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0];
pub const RATIOS: [f64; 3] = [0.1, 0.01, 0.001];
pub const FLAGS: [TracerFlags; 4] = [
    TracerFlags::FULL,
    TracerFlags::DIAGONAL,
    TracerFlags::OFF_DIAGONAL,
    TracerFlags::NONE,
];
const OMEGA1: f64 = 1.0;
const SAMPLES_PER_PERIOD: usize = 200;

/// Deliberate defects for checking that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the sine terms in the exact closed form.
    FlipExactSine,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flip-exact-sine" => Ok(Fault::FlipExactSine),
            _ => Err(format!("unknown fault '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
    /// Parameter point of the worst value.
    pub worst_at: String,
    pub evaluated: usize,
    /// Set when a computation inside the check failed outright.
    pub error: Option<String>,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{tag} {:<28} worst={:.3e} tol={:.1e} n={} at {}",
            self.name, self.worst, self.tolerance, self.evaluated, self.worst_at
        )?;
        if let Some(e) = &self.error {
            write!(f, " error: {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passed, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            3
        }
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    worst_at: String,
    evaluated: usize,
    error: Option<String>,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            worst: 0.0,
            worst_at: "-".into(),
            evaluated: 0,
            error: None,
        }
    }

    fn record(&mut self, value: f64, at: impl FnOnce() -> String) {
        self.evaluated += 1;
        // A NaN sticks so that it fails the comparison in `finish`.
        if !self.worst.is_nan() && (value.is_nan() || value > self.worst) {
            self.worst = value;
            self.worst_at = at();
        }
    }

    fn absorb(&mut self, outcome: Result<Vec<(f64, String)>>) {
        match outcome {
            Ok(values) => {
                for (v, at) in values {
                    self.record(v, || at);
                }
            }
            Err(e) => {
                if self.error.is_none() {
                    self.error = Some(e.to_string());
                }
            }
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            passed: self.error.is_none() && self.evaluated > 0 && self.worst <= self.tolerance,
            worst: self.worst,
            tolerance: self.tolerance,
            worst_at: self.worst_at,
            evaluated: self.evaluated,
            error: self.error,
        }
    }
}

fn at(theta: f64, ratio: f64, flags: &TracerFlags, extra: &str) -> String {
    format!("theta={:.6} ratio={ratio:e} flags={flags}{extra}", theta)
}

fn params(theta: f64, ratio: f64) -> FieldParams {
    FieldParams::from_ratio(theta, ratio, OMEGA1).expect("verification grid is in range")
}

fn exact(p: &FieldParams, flags: &TracerFlags, fault: Option<Fault>) -> ExactEvolution {
    let e = ExactEvolution::new(p, flags);
    match fault {
        Some(Fault::FlipExactSine) => e.with_flipped_sine(),
        None => e,
    }
}

fn initial_conditions() -> [CoefficientPair; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        CoefficientPair::LOWER,
        CoefficientPair::UPPER,
        CoefficientPair::new(Complex64::new(s, 0.0), Complex64::new(0.0, s)),
    ]
}

fn grid_points() -> Vec<(f64, f64)> {
    THETAS
        .iter()
        .flat_map(|&t| RATIOS.iter().map(move |&r| (t, r)))
        .collect()
}

pub fn run(fault: Option<Fault>) -> VerifyReport {
    let checks = vec![
        coupling_identity_check(),
        eigensystem_check(),
        unitarity_check(fault),
        ode_residual_check(fault),
        oracle_triangle_check(fault),
        integrator_drift_check(),
        rotating_frame_check(fault),
        berry_sum_rule_check(),
    ];
    VerifyReport { checks }
}

/// `⟨φ₁|∂ₜφ₂⟩` against `−⟨φ₁|∂ₜH|φ₂⟩/(E₁−E₂)` on 20 `(θ, t)` points.
fn coupling_identity_check() -> CheckResult {
    let mut tally = Tally::new("coupling-identity", 1e-6);
    for &theta in &THETAS {
        let p = params(theta, 0.1);
        for k in 0..5 {
            let t = p.period() * (0.1 + 0.2 * k as f64);
            let (lhs, rhs) = coupling_identity(&p, t, coupling_identity_step(&p));
            let rel = (lhs - rhs).norm() / rhs.norm();
            tally.record(rel, || format!("theta={theta:.6} t={t:.6}"));
        }
    }
    tally.finish()
}

fn eigensystem_check() -> CheckResult {
    let mut tally = Tally::new("eigensystem-orthonormality", 1e-12);
    for &theta in &THETAS {
        let p = params(theta, 0.1);
        for k in 0..8 {
            let t = p.period() * k as f64 / 8.0;
            let eig = eigensystem_at(&p, t);
            let h = hamiltonian_at(&p, t);
            let gram = [
                (eig.phi1.dotc(&eig.phi1) - 1.0).norm(),
                (eig.phi2.dotc(&eig.phi2) - 1.0).norm(),
                eig.phi1.dotc(&eig.phi2).norm(),
            ];
            let residual = [
                (h * eig.phi1 - eig.phi1 * Complex64::from(eig.e1)).norm(),
                (h * eig.phi2 - eig.phi2 * Complex64::from(eig.e2)).norm(),
            ];
            let worst = gram.into_iter().chain(residual).fold(0.0, f64::max);
            tally.record(worst, || format!("theta={theta:.6} t={t:.6}"));
        }
    }
    tally.finish()
}

fn unitarity_check(fault: Option<Fault>) -> CheckResult {
    let mut tally = Tally::new("closed-form-unitarity", 1e-12);
    for (theta, ratio) in grid_points() {
        let p = params(theta, ratio);
        for flags in &FLAGS {
            let ex = exact(&p, flags, fault);
            let ad = AdiabaticEvolution::new(&p, flags);
            for c0 in initial_conditions() {
                let worst = uniform_grid(p.period(), SAMPLES_PER_PERIOD)
                    .into_iter()
                    .flat_map(|t| [ex.coefficients(&c0, t), ad.coefficients(&c0, t)])
                    .map(|c| (c.norm_sqr() - 1.0).abs())
                    .fold(0.0, f64::max);
                tally.record(worst, || at(theta, ratio, flags, ""));
            }
        }
    }
    tally.finish()
}

/// Central differences of the closed form against the equations it solves,
/// relative to `ω₁`.
fn ode_residual_check(fault: Option<Fault>) -> CheckResult {
    let mut tally = Tally::new("closed-form-ode-residual", 1e-6);
    for (theta, ratio) in grid_points() {
        let p = params(theta, ratio);
        for flags in &FLAGS {
            let ex = exact(&p, flags, fault);
            let sys = CoefficientSystem::new(&p, flags);
            let fastest = ex.gamma().max(p.omega1()).max(p.omega0());
            let h = 1e-4 / fastest;
            for c0 in initial_conditions() {
                let worst = uniform_grid(p.period(), 50)
                    .into_iter()
                    .skip(1)
                    .map(|t| {
                        let fwd = ex.coefficients(&c0, t + h).to_array();
                        let bwd = ex.coefficients(&c0, t - h).to_array();
                        let rhs = sys.rhs(t, &ex.coefficients(&c0, t).to_array());
                        (0..2)
                            .map(|i| ((fwd[i] - bwd[i]) / (2.0 * h) - rhs[i]).norm())
                            .fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max);
                tally.record(worst / p.omega1(), || at(theta, ratio, flags, ""));
            }
        }
    }
    tally.finish()
}

/// Exact closed form, numeric coefficient equations and the lab-frame route
/// must agree pairwise over one period with the physical flags.
fn oracle_triangle_check(fault: Option<Fault>) -> CheckResult {
    let mut tally = Tally::new("oracle-triangle", 1e-8);
    let flags = TracerFlags::FULL;
    let outcomes: Vec<_> = grid_points()
        .into_par_iter()
        .map(|(theta, ratio)| -> Result<Vec<(f64, String)>> {
            let p = params(theta, ratio);
            let grid = uniform_grid(p.period(), SAMPLES_PER_PERIOD);
            let c0 = CoefficientPair::LOWER;
            let ex = exact(&p, &flags, fault).trajectory(&c0, &grid)?;
            let cfg = IntegratorConfig::for_params(&p, &flags);
            let ode = numeric::integrate_coefficients_on(&p, &flags, &c0, &grid, &cfg)?;
            let lab = numeric::lab_route_coefficients(
                &p,
                &c0,
                &grid,
                &IntegratorConfig::for_lab_frame(&p),
            )?;
            Ok(vec![
                (
                    ex.max_deviation(&ode)?,
                    at(theta, ratio, &flags, " exact-vs-ode"),
                ),
                (
                    ex.max_deviation(&lab)?,
                    at(theta, ratio, &flags, " exact-vs-lab"),
                ),
                (
                    ode.max_deviation(&lab)?,
                    at(theta, ratio, &flags, " ode-vs-lab"),
                ),
            ])
        })
        .collect();
    outcomes.into_iter().for_each(|o| tally.absorb(o));
    tally.finish()
}

fn integrator_drift_check() -> CheckResult {
    let mut tally = Tally::new("integrator-norm-drift", 1e-9);
    let outcomes: Vec<_> = grid_points()
        .into_par_iter()
        .map(|(theta, ratio)| -> Result<Vec<(f64, String)>> {
            let p = params(theta, ratio);
            let grid = uniform_grid(p.period(), SAMPLES_PER_PERIOD);
            let c0 = initial_conditions()[2];
            let mut out = Vec::new();
            for flags in &FLAGS {
                let cfg = IntegratorConfig::for_params(&p, flags);
                let traj = numeric::integrate_coefficients_on(&p, flags, &c0, &grid, &cfg)?;
                out.push((
                    traj.max_norm_drift(),
                    at(theta, ratio, flags, " coefficients"),
                ));
                let cfg = IntegratorConfig::for_rotating_frame(&p, flags);
                let rot = numeric::integrate_rotating_frame_on(&p, flags, &c0, &grid, &cfg)?;
                out.push((rot.max_norm_drift(), at(theta, ratio, flags, " rotating")));
            }
            let psi0 = numeric::initial_spinor(&p, &c0);
            let lab = numeric::integrate_lab_frame_on(
                &p,
                &psi0,
                &grid,
                &IntegratorConfig::for_lab_frame(&p),
            )?;
            out.push((
                lab.max_norm_drift(),
                at(theta, ratio, &TracerFlags::FULL, " lab"),
            ));
            Ok(out)
        })
        .collect();
    outcomes.into_iter().for_each(|o| tally.absorb(o));
    tally.finish()
}

fn rotating_frame_check(fault: Option<Fault>) -> CheckResult {
    let mut tally = Tally::new("rotating-frame-vs-exact", 1e-9);
    for (theta, ratio) in grid_points() {
        let p = params(theta, ratio);
        for flags in &FLAGS {
            let outcome = (|| -> Result<Vec<(f64, String)>> {
                let grid = uniform_grid(p.period(), SAMPLES_PER_PERIOD);
                let c0 = initial_conditions()[2];
                let cfg = IntegratorConfig::for_rotating_frame(&p, flags);
                let rot = numeric::integrate_rotating_frame_on(&p, flags, &c0, &grid, &cfg)?;
                let back = numeric::rotating_to_instantaneous(&p, &rot)?;
                let ex = exact(&p, flags, fault).trajectory(&c0, &grid)?;
                Ok(vec![(
                    ex.max_deviation(&back)?,
                    at(theta, ratio, flags, ""),
                )])
            })();
            tally.absorb(outcome);
        }
    }
    tally.finish()
}

/// The two adiabatic geometric phases add up to a multiple of `2π` and
/// match their closed forms.
fn berry_sum_rule_check() -> CheckResult {
    let mut tally = Tally::new("berry-sum-rule", 1e-10);
    for (theta, ratio) in grid_points() {
        let p = params(theta, ratio);
        let outcome = (|| -> Result<Vec<(f64, String)>> {
            let g1 = phase::berry_phase(&p, Level::Lower, BerryRoute::AdiabaticClosedForm)?
                .geometric_phase;
            let g2 = phase::berry_phase(&p, Level::Upper, BerryRoute::AdiabaticClosedForm)?
                .geometric_phase;
            let flags = TracerFlags::FULL;
            Ok(vec![
                (
                    phase::wrap_phase(g1 + g2).abs(),
                    at(theta, ratio, &flags, " sum"),
                ),
                (
                    phase::wrap_phase(g1 - phase::expected_geometric_phase(theta, Level::Lower))
                        .abs(),
                    at(theta, ratio, &flags, " lower"),
                ),
                (
                    phase::wrap_phase(g2 - phase::expected_geometric_phase(theta, Level::Upper))
                        .abs(),
                    at(theta, ratio, &flags, " upper"),
                ),
            ])
        })();
        tally.absorb(outcome);
    }
    tally.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_treats_nan_as_failure() {
        let mut t = Tally::new("x", 1.0);
        t.record(0.5, || "a".into());
        t.record(f64::NAN, || "b".into());
        t.record(0.7, || "c".into());
        let r = t.finish();
        assert!(!r.passed);
        assert_eq!(r.worst_at, "b");
    }

    #[test]
    fn empty_tally_fails() {
        assert!(!Tally::new("x", 1.0).finish().passed);
    }

    #[test]
    fn fault_names() {
        assert_eq!(
            "flip-exact-sine".parse::<Fault>().unwrap(),
            Fault::FlipExactSine
        );
        assert!("nope".parse::<Fault>().is_err());
    }
}
