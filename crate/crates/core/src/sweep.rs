//! Batch evaluation over a grid of `(θ, ω₀/ω₁, tracer flags)` points.
//!
//! Every [`RunRecord`] carries the full parameter point, so it can be
//! re-evaluated on its own with [`RunRecord::reexecute`]. Records are
//! ordered by parameter point, never by completion order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{AdiabaticEvolution, ExactEvolution};
use crate::error::{Error, Result};
use crate::model::{CoefficientPair, FieldParams, Level, TracerFlags};
use crate::numeric;
use crate::ode::IntegratorConfig;
use crate::phase::{self, fit_scaling, BerryRoute, ScalingFit};
use crate::trajectory::phase_tracking_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// `sup_t ‖exact − adiabatic‖` over the run.
    SupError,
    /// `‖exact − adiabatic‖` at the final time.
    TerminalError,
    GammaDecomposition,
    BerryPhase,
    /// Largest norm drift of the numerically integrated coefficients.
    NormDrift,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::SupError,
        Metric::TerminalError,
        Metric::GammaDecomposition,
        Metric::BerryPhase,
        Metric::NormDrift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SupError => "sup-error",
            Metric::TerminalError => "terminal-error",
            Metric::GammaDecomposition => "gamma-decomposition",
            Metric::BerryPhase => "berry-phase",
            Metric::NormDrift => "norm-drift",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub theta_values: Vec<f64>,
    pub ratio_values: Vec<f64>,
    pub flags_variants: Vec<TracerFlags>,
    pub initial_condition: CoefficientPair,
    pub periods: u32,
    pub metrics: Vec<Metric>,
    pub omega1: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSweep(msg));
        if self.theta_values.is_empty() {
            return fail("theta list is empty".into());
        }
        if self.ratio_values.is_empty() {
            return fail("ratio list is empty".into());
        }
        if self.flags_variants.is_empty() {
            return fail("flags list is empty".into());
        }
        if self.metrics.is_empty() {
            return fail("metric list is empty".into());
        }
        if self.periods == 0 {
            return fail("periods must be at least 1".into());
        }
        if let Some(r) = self
            .ratio_values
            .iter()
            .find(|r| !(r.is_finite() && **r > 0.0))
        {
            return fail(format!("ratio {r} is not positive"));
        }
        for &theta in &self.theta_values {
            for &ratio in &self.ratio_values {
                FieldParams::from_ratio(theta, ratio, self.omega1)?;
            }
        }
        self.initial_condition.ensure_normalized(1e-10)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("sweep spec serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Points in output order: θ, then flags, then ratio.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &theta in &self.theta_values {
            for &flags in &self.flags_variants {
                for &ratio in &self.ratio_values {
                    out.push(SweepPoint {
                        theta,
                        ratio,
                        omega1: self.omega1,
                        flags,
                        initial_condition: self.initial_condition,
                        periods: self.periods,
                    });
                }
            }
        }
        out
    }
}

/// Everything needed to evaluate one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub ratio: f64,
    pub omega1: f64,
    pub flags: TracerFlags,
    pub initial_condition: CoefficientPair,
    pub periods: u32,
}

impl SweepPoint {
    pub fn params(&self) -> Result<FieldParams> {
        FieldParams::from_ratio(self.theta, self.ratio, self.omega1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub spec_hash: String,
    pub point: SweepPoint,
    pub metric: Metric,
    /// Which number of the metric this is, e.g. `gamma-nondiagonal`.
    pub quantity: String,
    pub value: f64,
    pub solver: String,
    pub wall_time_s: f64,
}

impl RunRecord {
    /// Evaluate the record's point again and return the same quantity.
    pub fn reexecute(&self) -> Result<f64> {
        evaluate(&self.point, self.metric)?
            .into_iter()
            .find(|q| q.quantity == self.quantity)
            .map(|q| q.value)
            .ok_or_else(|| {
                Error::InvalidSweep(format!("metric does not produce {}", self.quantity))
            })
    }
}

/// One number produced by a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub quantity: String,
    pub value: f64,
    pub solver: String,
}

impl Quantity {
    fn new(quantity: &str, value: f64, solver: impl Into<String>) -> Self {
        Self {
            quantity: quantity.to_string(),
            value,
            solver: solver.into(),
        }
    }
}

pub fn evaluate(point: &SweepPoint, metric: Metric) -> Result<Vec<Quantity>> {
    let params = point.params()?;
    let flags = point.flags;
    let c0 = point.initial_condition;
    let t_end = params.period() * point.periods as f64;
    match metric {
        Metric::SupError | Metric::TerminalError => {
            let exact = ExactEvolution::new(&params, &flags);
            let adiabatic = AdiabaticEvolution::new(&params, &flags);
            let solver = "exact-vs-adiabatic";
            if metric == Metric::TerminalError {
                let d = exact
                    .coefficients(&c0, t_end)
                    .distance(&adiabatic.coefficients(&c0, t_end));
                return Ok(vec![Quantity::new("terminal-error", d, solver)]);
            }
            let fastest = exact.gamma().max(params.omega1()).max(params.omega0());
            let sup = phase_tracking_grid(t_end, fastest)
                .into_iter()
                .map(|t| {
                    exact
                        .coefficients(&c0, t)
                        .distance(&adiabatic.coefficients(&c0, t))
                })
                .fold(0.0, f64::max);
            Ok(vec![Quantity::new("sup-error", sup, solver)])
        }
        Metric::GammaDecomposition => {
            let d = phase::rabi_decomposition(&params, &flags);
            let solver = "closed-form";
            Ok(vec![
                Quantity::new("gamma", d.gamma, solver),
                Quantity::new("gamma-aa", d.gamma_aa, solver),
                Quantity::new("gamma-diagonal", d.diagonal_rel, solver),
                Quantity::new("gamma-nondiagonal", d.nondiagonal_rel, solver),
            ])
        }
        Metric::BerryPhase => {
            let exact = phase::berry_phase(&params, Level::Lower, BerryRoute::ExactClosedForm)?;
            let adiabatic =
                phase::berry_phase(&params, Level::Lower, BerryRoute::AdiabaticClosedForm)?;
            let solver = "exact-closed-form-vs-adiabatic-closed-form";
            Ok(vec![
                Quantity::new("berry-phase", exact.geometric_phase, solver),
                Quantity::new(
                    "berry-phase-error",
                    phase::wrap_phase(exact.geometric_phase - adiabatic.geometric_phase).abs(),
                    solver,
                ),
            ])
        }
        Metric::NormDrift => {
            let cfg = IntegratorConfig::for_params(&params, &flags);
            let grid = crate::trajectory::uniform_grid(t_end, 64 * point.periods as usize);
            let traj = numeric::integrate_coefficients_on(&params, &flags, &c0, &grid, &cfg)?;
            let solver = format!("numeric-ode:dopri5:rtol={:e}", cfg.rel_tol);
            Ok(vec![Quantity::new(
                "norm-drift",
                traj.max_norm_drift(),
                solver,
            )])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub point: SweepPoint,
    pub metric: Metric,
    pub error: String,
}

/// Power-law fit of one `(θ, flags, quantity)` series against the ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesFit {
    pub theta: f64,
    pub flags: TracerFlags,
    pub quantity: String,
    pub fit: Option<ScalingFit>,
    /// Why no fit was produced.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub spec_hash: String,
    pub records: Vec<RunRecord>,
    pub failures: Vec<PointFailure>,
    pub fits: Vec<SeriesFit>,
}

/// Run every `(point, metric)` pair on up to `workers` threads
/// (0 = rayon's default). Failures are collected, not propagated.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    let hash = spec.hash();
    let jobs: Vec<(SweepPoint, Metric)> = spec
        .points()
        .into_iter()
        .flat_map(|p| spec.metrics.iter().map(move |&m| (p, m)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidSweep(format!("thread pool: {e}")))?;
    let results: Vec<(SweepPoint, Metric, Result<Vec<Quantity>>, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(point, metric)| {
                let start = Instant::now();
                let out = evaluate(&point, metric);
                (point, metric, out, start.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (point, metric, out, wall) in results {
        match out {
            Ok(quantities) => records.extend(quantities.into_iter().map(|q| RunRecord {
                spec_hash: hash.clone(),
                point,
                metric,
                quantity: q.quantity,
                value: q.value,
                solver: q.solver,
                wall_time_s: wall,
            })),
            Err(e) => failures.push(PointFailure {
                point,
                metric,
                error: e.to_string(),
            }),
        }
    }
    let fits = fit_series(spec, &records);
    Ok(SweepOutcome {
        spec_hash: hash,
        records,
        failures,
        fits,
    })
}

/// Quantities that tend to a finite value as the ratio goes to zero, so a
/// power law says nothing about them.
const LEVEL_QUANTITIES: [&str; 3] = ["gamma", "gamma-aa", "berry-phase"];

fn fit_series(spec: &SweepSpec, records: &[RunRecord]) -> Vec<SeriesFit> {
    // Keyed by position in the spec so the output order is stable.
    let mut series: BTreeMap<(usize, usize, String), Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let ti = spec
            .theta_values
            .iter()
            .position(|&t| t == r.point.theta)
            .unwrap_or(0);
        let fi = spec
            .flags_variants
            .iter()
            .position(|&f| f == r.point.flags)
            .unwrap_or(0);
        series
            .entry((ti, fi, r.quantity.clone()))
            .or_default()
            .push((r.point.ratio, r.value.abs()));
    }
    series
        .into_iter()
        .map(|((ti, fi, quantity), points)| {
            let (fit, skipped) = if LEVEL_QUANTITIES.contains(&quantity.as_str()) {
                (None, Some("does not vanish with the ratio".to_string()))
            } else {
                match fit_scaling(&points) {
                    Ok(fit) => (Some(fit), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            SeriesFit {
                theta: spec.theta_values[ti],
                flags: spec.flags_variants[fi],
                quantity,
                fit,
                skipped,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec() -> SweepSpec {
        SweepSpec {
            theta_values: vec![PI / 4.0],
            ratio_values: vec![1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3],
            flags_variants: vec![TracerFlags::FULL],
            initial_condition: CoefficientPair::LOWER,
            periods: 1,
            metrics: vec![Metric::GammaDecomposition, Metric::TerminalError],
            omega1: 1.0,
        }
    }

    #[test]
    fn rejects_empty_lists_before_running() {
        let mut s = spec();
        s.ratio_values.clear();
        assert!(matches!(run_sweep(&s, 1), Err(Error::InvalidSweep(_))));
        let mut s = spec();
        s.periods = 0;
        assert!(s.validate().is_err());
        let mut s = spec();
        s.ratio_values.push(-1.0);
        assert!(s.validate().is_err());
        let mut s = spec();
        s.theta_values.push(PI);
        assert!(matches!(s.validate(), Err(Error::ThetaOutOfRange(_))));
    }

    #[test]
    fn records_are_ordered_and_reexecutable() {
        let out = run_sweep(&spec(), 3).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.records.len(), 5 * 5);
        let ratios: Vec<f64> = out
            .records
            .iter()
            .filter(|r| r.quantity == "gamma")
            .map(|r| r.point.ratio)
            .collect();
        assert_eq!(ratios, spec().ratio_values);
        for r in &out.records {
            assert_eq!(r.spec_hash, out.spec_hash);
            assert!((r.reexecute().unwrap() - r.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn nondiagonal_series_is_quadratic() {
        let out = run_sweep(&spec(), 0).unwrap();
        let fit = out
            .fits
            .iter()
            .find(|f| f.quantity == "gamma-nondiagonal")
            .and_then(|f| f.fit.clone())
            .unwrap();
        assert!((fit.slope - 2.0).abs() < 0.1, "{}", fit.slope);
    }

    #[test]
    fn hash_tracks_content() {
        let a = spec();
        let mut b = spec();
        assert_eq!(a.hash(), b.hash());
        b.periods = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert!("bogus".parse::<Metric>().is_err());
    }
}
