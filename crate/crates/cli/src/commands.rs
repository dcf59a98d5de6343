//! Each command is split into a preparation step, which only parses and
//! validates settings, and a run step that does the numerical work. Errors
//! from the first are usage errors, errors from the second are computation
//! failures.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use adiaspin::analytic::{AdiabaticEvolution, ExactEvolution};
use adiaspin::numeric;
use adiaspin::phase::{self, accumulated_phase, BerryRoute, PhaseReport};
use adiaspin::sweep::{self, SweepOutcome, SweepSpec};
use adiaspin::trajectory::{period_grid, phase_tracking_grid};
use adiaspin::verify::{self, Fault};
use adiaspin::{CoefficientPair, FieldParams, IntegratorConfig, Level, TracerFlags, Trajectory};
use serde_json::json;

use crate::config::{ConfigError, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] ConfigError),
    #[error(transparent)]
    Compute(#[from] adiaspin::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} sweep point(s) failed")]
    SweepFailures(usize),
    #[error("verification failed")]
    Verification,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Verification => 3,
            _ => 2,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

/// Floats with 17 significant digits, enough to round-trip an `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn sink(out: Option<&str>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn positive_ratio(ratio: f64) -> Result<f64, ConfigError> {
    if ratio > 0.0 {
        Ok(ratio)
    } else {
        Err(ConfigError::Invalid {
            key: "ratio",
            msg: format!("{ratio} is not positive"),
        })
    }
}

fn periods(s: &Settings) -> Result<u32, ConfigError> {
    let p: u32 = s.parsed_or("periods", 1)?;
    if p == 0 {
        return Err(ConfigError::Invalid {
            key: "periods",
            msg: "must be at least 1".into(),
        });
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Exact,
    Adiabatic,
    Numeric,
    NumericLab,
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Solver::Exact),
            "adiabatic" => Ok(Solver::Adiabatic),
            "numeric" => Ok(Solver::Numeric),
            "numeric-lab" => Ok(Solver::NumericLab),
            _ => Err(format!(
                "unknown solver '{s}' (exact, adiabatic, numeric, numeric-lab)"
            )),
        }
    }
}

pub struct EvolveJob {
    params: FieldParams,
    flags: TracerFlags,
    solver: Solver,
    c0: CoefficientPair,
    grid: Vec<f64>,
    out: Option<String>,
}

impl EvolveJob {
    pub fn prepare(s: &Settings) -> Result<Self, ConfigError> {
        let ratio = positive_ratio(s.float("ratio")?)?;
        let params = FieldParams::from_ratio(s.angle("theta")?, ratio, s.float_or("omega1", 1.0)?)?;
        let flags = s.flags()?;
        let solver = s.parsed_or("solver", Solver::Exact)?;
        if solver == Solver::NumericLab && flags != TracerFlags::FULL {
            return Err(ConfigError::Invalid {
                key: "flags",
                msg: "the lab-frame solver only solves the physical equations (1,1,1)".into(),
            });
        }
        let periods = periods(s)?;
        let grid = match s.raw("samples") {
            Some(_) => period_grid(&params, periods, s.parsed_or("samples", 0usize)?)?,
            None => {
                let fastest = adiaspin::gamma(&params, &flags)
                    .gamma
                    .max(params.omega1())
                    .max(params.omega0());
                phase_tracking_grid(params.period() * periods as f64, fastest)
            }
        };
        Ok(Self {
            params,
            flags,
            solver,
            c0: s.initial()?,
            grid,
            out: s.raw("out").map(str::to_string),
        })
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let (p, f, c0, grid) = (&self.params, &self.flags, &self.c0, &self.grid);
        Ok(match self.solver {
            Solver::Exact => ExactEvolution::new(p, f).trajectory(c0, grid)?,
            Solver::Adiabatic => AdiabaticEvolution::new(p, f).trajectory(c0, grid)?,
            Solver::Numeric => numeric::integrate_coefficients_on(
                p,
                f,
                c0,
                grid,
                &IntegratorConfig::for_params(p, f),
            )?,
            Solver::NumericLab => {
                numeric::lab_route_coefficients(p, c0, grid, &IntegratorConfig::for_lab_frame(p))?
            }
        })
    }

    pub fn run(&self) -> Result<()> {
        let traj = self.trajectory()?;
        let phase1 = accumulated_phase(traj.samples().iter().map(|c| c.c1));
        let phase2 = accumulated_phase(traj.samples().iter().map(|c| c.c2));
        let mut w = csv::Writer::from_writer(sink(self.out.as_deref())?);
        w.write_record([
            "t", "re_c1", "im_c1", "re_c2", "im_c2", "abs2_c1", "abs2_c2", "norm", "phase_c1",
            "phase_c2",
        ])?;
        for (i, (t, c)) in traj.iter().enumerate() {
            let (a1, a2) = (c.c1.norm_sqr(), c.c2.norm_sqr());
            w.write_record([
                num(t),
                num(c.c1.re),
                num(c.c1.im),
                num(c.c2.re),
                num(c.c2.im),
                num(a1),
                num(a2),
                num(a1 + a2),
                num(phase1[i]),
                num(phase2[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct SweepJob {
    spec: SweepSpec,
    workers: usize,
    wall_time: bool,
    out: Option<String>,
}

impl SweepJob {
    pub fn prepare(s: &Settings) -> Result<Self, ConfigError> {
        let spec = SweepSpec {
            theta_values: s.angles("theta")?,
            ratio_values: s.floats("ratio")?,
            flags_variants: s.flags_list()?,
            initial_condition: s.initial()?,
            periods: periods(s)?,
            metrics: s.metrics()?,
            omega1: s.float_or("omega1", 1.0)?,
        };
        spec.validate()?;
        Ok(Self {
            spec,
            workers: s.parsed_or("workers", 0usize)?,
            wall_time: s.flag("wall-time")?,
            out: s.raw("out").map(str::to_string),
        })
    }

    pub fn run(&self) -> Result<()> {
        let outcome = sweep::run_sweep(&self.spec, self.workers)?;
        self.write_records(&outcome)?;
        for f in &outcome.fits {
            match &f.fit {
                Some(fit) => eprintln!(
                    "fit theta={:.6} flags={} {}: slope={:.4} r2={:.6}",
                    f.theta, f.flags, f.quantity, fit.slope, fit.r_squared
                ),
                None => eprintln!(
                    "fit theta={:.6} flags={} {}: skipped ({})",
                    f.theta,
                    f.flags,
                    f.quantity,
                    f.skipped.as_deref().unwrap_or("")
                ),
            }
        }
        if let Some(out) = &self.out {
            let file = BufWriter::new(File::create(format!("{out}.fits.json"))?);
            let doc = json!({
                "spec_hash": outcome.spec_hash,
                "spec": self.spec,
                "fits": outcome.fits,
            });
            serde_json::to_writer_pretty(file, &doc).map_err(io::Error::from)?;
        }
        for f in &outcome.failures {
            eprintln!(
                "failed theta={} ratio={} flags={} metric={}: {}",
                f.point.theta, f.point.ratio, f.point.flags, f.metric, f.error
            );
        }
        if outcome.failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::SweepFailures(outcome.failures.len()))
        }
    }

    fn write_records(&self, outcome: &SweepOutcome) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink(self.out.as_deref())?);
        let mut header = vec![
            "spec_hash",
            "theta",
            "ratio",
            "omega1",
            "a11",
            "a22",
            "a",
            "re_c1",
            "im_c1",
            "re_c2",
            "im_c2",
            "periods",
            "metric",
            "quantity",
            "value",
            "solver",
            "status",
        ];
        if self.wall_time {
            header.push("wall_time_s");
        }
        w.write_record(&header)?;
        let point_fields = |p: &sweep::SweepPoint| {
            let c = p.initial_condition;
            vec![
                outcome.spec_hash.clone(),
                num(p.theta),
                num(p.ratio),
                num(p.omega1),
                num(p.flags.a11()),
                num(p.flags.a22()),
                num(p.flags.a()),
                num(c.c1.re),
                num(c.c1.im),
                num(c.c2.re),
                num(c.c2.im),
                p.periods.to_string(),
            ]
        };
        for r in &outcome.records {
            let mut row = point_fields(&r.point);
            row.extend([
                r.metric.to_string(),
                r.quantity.clone(),
                num(r.value),
                r.solver.clone(),
                "ok".to_string(),
            ]);
            if self.wall_time {
                row.push(num(r.wall_time_s));
            }
            w.write_record(&row)?;
        }
        for f in &outcome.failures {
            let mut row = point_fields(&f.point);
            row.extend([
                f.metric.to_string(),
                String::new(),
                num(f64::NAN),
                String::new(),
                format!("error: {}", f.error),
            ]);
            if self.wall_time {
                row.push(String::new());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct BerryJob {
    points: Vec<FieldParams>,
    routes: Vec<BerryRoute>,
    states: Vec<Level>,
    out: Option<String>,
}

/// One output row: a report plus the closed-form value and the sum rule of
/// its route.
struct BerryRow {
    report: PhaseReport,
    expected: f64,
    sum_rule: f64,
}

impl BerryJob {
    pub fn prepare(s: &Settings) -> Result<Self, ConfigError> {
        let omega1 = s.float_or("omega1", 1.0)?;
        let thetas = s.angles("theta")?;
        let ratios = s.floats("ratio")?;
        let mut points = Vec::new();
        for &theta in &thetas {
            for &ratio in &ratios {
                points.push(FieldParams::from_ratio(
                    theta,
                    positive_ratio(ratio)?,
                    omega1,
                )?);
            }
        }
        Ok(Self {
            points,
            routes: s.routes()?,
            states: s.states()?,
            out: s.raw("out").map(str::to_string),
        })
    }

    fn rows(&self) -> Result<Vec<BerryRow>> {
        let mut rows = Vec::new();
        for p in &self.points {
            for &route in &self.routes {
                let lower = phase::berry_phase(p, Level::Lower, route)?;
                let upper = phase::berry_phase(p, Level::Upper, route)?;
                let sum_rule = phase::wrap_phase(lower.geometric_phase + upper.geometric_phase);
                for report in [lower, upper] {
                    if self.states.contains(&report.state) {
                        rows.push(BerryRow {
                            expected: phase::expected_geometric_phase(p.theta(), report.state),
                            sum_rule,
                            report,
                        });
                    }
                }
            }
        }
        Ok(rows)
    }

    pub fn run(&self) -> Result<()> {
        let rows = self.rows()?;
        for r in rows.iter().filter(|r| r.report.leakage_warning) {
            eprintln!(
                "warning: theta={} ratio={} route={} state={}: residual mixing {:.3e}",
                r.report.theta,
                r.report.ratio,
                r.report.route,
                r.report.state,
                r.report.residual_mixing
            );
        }
        let json_out = self
            .out
            .as_deref()
            .is_some_and(|o| Path::new(o).extension().is_some_and(|e| e == "json"));
        let out = sink(self.out.as_deref())?;
        if json_out {
            let doc: Vec<_> = rows
                .iter()
                .map(|r| {
                    let mut v = serde_json::to_value(&r.report).expect("report serializes");
                    v["expected_geometric_phase"] = json!(r.expected);
                    v["sum_rule"] = json!(r.sum_rule);
                    v["lab_phase"] = json!(r.report.lab_phase());
                    v
                })
                .collect();
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &doc).map_err(io::Error::from)?;
            writeln!(out)?;
            out.flush()?;
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "theta",
            "ratio",
            "route",
            "state",
            "period",
            "total_phase",
            "dynamical_phase",
            "geometric_phase",
            "lab_phase",
            "expected_geometric_phase",
            "sum_rule",
            "residual_mixing",
            "leakage_warning",
        ])?;
        for r in &rows {
            let rep = &r.report;
            w.write_record([
                num(rep.theta),
                num(rep.ratio),
                rep.route.to_string(),
                rep.state.to_string(),
                num(rep.period),
                num(rep.total_phase),
                num(rep.dynamical_phase),
                num(rep.geometric_phase),
                num(rep.lab_phase()),
                num(r.expected),
                num(r.sum_rule),
                num(rep.residual_mixing),
                rep.leakage_warning.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run_verify(fault: Option<Fault>, out: Option<&str>) -> Result<()> {
    let report = verify::run(fault);
    println!("{report}");
    if let Some(path) = out {
        let mut w = BufWriter::new(File::create(path)?);
        if path.ends_with(".json") {
            serde_json::to_writer_pretty(&mut w, &report).map_err(io::Error::from)?;
        } else {
            write!(w, "{report}")?;
        }
        writeln!(w)?;
        w.flush()?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Verification)
    }
}
