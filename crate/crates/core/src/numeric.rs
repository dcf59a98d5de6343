//! Direct numerical integration: the independent check on every closed
//! form.
//!
//! Three systems are integrated. The coefficient equations in the
//! instantaneous basis carry the fast `e^{±2iω₁t}` couplings; the same
//! equations in the rotating frame have constant coefficients; the lab-frame
//! Schrödinger equation `i∂ₜψ = H(t)ψ` involves no expansion at all and is
//! mapped onto the instantaneous basis afterwards.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    eigensystem_at, hamiltonian_at, CoefficientPair, FieldParams, Level, Spinor, TracerFlags,
};
use crate::ode::{self, IntegratorConfig, OdeSystem, State};
use crate::trajectory::{validate_grid, Frame, SolverKind, Trajectory};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tracer-tagged coefficient equations on the instantaneous basis.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientSystem {
    diag1: f64,
    diag2: f64,
    coupling: f64,
    omega1: f64,
}

impl CoefficientSystem {
    pub fn new(params: &FieldParams, flags: &TracerFlags) -> Self {
        let w0 = params.omega0();
        Self {
            diag1: flags.a11() * w0 * params.d().powi(2),
            diag2: flags.a22() * w0 * params.a().powi(2),
            coupling: flags.a() * w0 * params.a() * params.d(),
            omega1: params.omega1(),
        }
    }
}

impl OdeSystem for CoefficientSystem {
    fn rhs(&self, t: f64, c: &State) -> State {
        let beat = Complex64::from_polar(1.0, 2.0 * self.omega1 * t);
        [
            -I * (c[0] * self.diag1 + beat.conj() * c[1] * self.coupling),
            -I * (beat * c[0] * self.coupling + c[1] * self.diag2),
        ]
    }
}

/// The same equations for `X₁ = c₁e^{iω₁t}`, `X₂ = c₂e^{−iω₁t}`:
/// time-independent right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct RotatingFrameSystem {
    d1: f64,
    d2: f64,
    coupling: f64,
}

impl RotatingFrameSystem {
    pub fn new(params: &FieldParams, flags: &TracerFlags) -> Self {
        let w0 = params.omega0();
        let w1 = params.omega1();
        Self {
            d1: w1 - flags.a11() * w0 * params.d().powi(2),
            d2: -(w1 + flags.a22() * w0 * params.a().powi(2)),
            coupling: flags.a() * w0 * params.a() * params.d(),
        }
    }

    /// The generator `M` of `Ẋ = M X`.
    pub fn generator(&self) -> [[Complex64; 2]; 2] {
        let off = -I * self.coupling;
        [[I * self.d1, off], [off, I * self.d2]]
    }
}

impl OdeSystem for RotatingFrameSystem {
    fn rhs(&self, _t: f64, x: &State) -> State {
        let m = self.generator();
        [
            m[0][0] * x[0] + m[0][1] * x[1],
            m[1][0] * x[0] + m[1][1] * x[1],
        ]
    }
}

/// `i∂ₜψ = H(t)ψ` on `(|↑⟩, |↓⟩)`.
#[derive(Debug, Clone, Copy)]
pub struct LabFrameSystem {
    params: FieldParams,
}

impl LabFrameSystem {
    pub fn new(params: &FieldParams) -> Self {
        Self { params: *params }
    }
}

impl OdeSystem for LabFrameSystem {
    fn rhs(&self, t: f64, psi: &State) -> State {
        let h = hamiltonian_at(&self.params, t);
        [
            -I * (h[(0, 0)] * psi[0] + h[(0, 1)] * psi[1]),
            -I * (h[(1, 0)] * psi[0] + h[(1, 1)] * psi[1]),
        ]
    }
}

/// Phase `∫₀ᵗ Eₙ(t′) dt′` accumulated by an energy level.
pub trait EnergyLevel {
    fn energy_at(&self, t: f64) -> f64;

    /// Composite Simpson quadrature; levels with constant energy override
    /// this with the exact product.
    fn phase_integral(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let n = 2 * ((t.abs() * 8.0).ceil() as usize).clamp(16, 1 << 20);
        let h = t / n as f64;
        let mut acc = self.energy_at(0.0) + self.energy_at(t);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.energy_at(h * k as f64);
        }
        acc * h / 3.0
    }
}

/// A level of the spin-½ model; its energy is time independent.
#[derive(Debug, Clone, Copy)]
pub struct SpinHalfLevel {
    energy: f64,
}

impl SpinHalfLevel {
    pub fn new(params: &FieldParams, level: Level) -> Self {
        Self {
            energy: level.energy(params),
        }
    }
}

impl EnergyLevel for SpinHalfLevel {
    fn energy_at(&self, _t: f64) -> f64 {
        self.energy
    }

    fn phase_integral(&self, t: f64) -> f64 {
        self.energy * t
    }
}

fn integrate<S: OdeSystem>(
    system: &S,
    params: &FieldParams,
    y0: State,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<State>> {
    cfg.validate(params)?;
    validate_grid(times)?;
    if times[0] != 0.0 {
        return Err(Error::InvalidTimeGrid("grid must start at t = 0".into()));
    }
    Ok(ode::solve(system, y0, times, cfg)?)
}

fn endpoints(t_end: f64) -> Result<[f64; 2]> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidTimeGrid(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    Ok([0.0, t_end])
}

fn to_pairs(states: Vec<State>) -> Vec<CoefficientPair> {
    states
        .into_iter()
        .map(CoefficientPair::from_array)
        .collect()
}

/// Integrate the instantaneous-basis coefficient equations on `times`
/// (starting at 0).
pub fn integrate_coefficients_on(
    params: &FieldParams,
    flags: &TracerFlags,
    c0: &CoefficientPair,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let states = integrate(
        &CoefficientSystem::new(params, flags),
        params,
        c0.to_array(),
        times,
        cfg,
    )?;
    Trajectory::new(
        times.to_vec(),
        to_pairs(states),
        Frame::InstantaneousBasis,
        SolverKind::NumericOde,
    )
}

pub fn integrate_coefficients(
    params: &FieldParams,
    flags: &TracerFlags,
    c0: &CoefficientPair,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_coefficients_on(params, flags, c0, &endpoints(t_end)?, cfg)
}

/// Integrate the constant-coefficient rotating-frame equations. `x0` equals
/// `c0` since the frames coincide at `t = 0`.
pub fn integrate_rotating_frame_on(
    params: &FieldParams,
    flags: &TracerFlags,
    x0: &CoefficientPair,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let states = integrate(
        &RotatingFrameSystem::new(params, flags),
        params,
        x0.to_array(),
        times,
        cfg,
    )?;
    Trajectory::new(
        times.to_vec(),
        to_pairs(states),
        Frame::Rotating,
        SolverKind::NumericOde,
    )
}

pub fn integrate_rotating_frame(
    params: &FieldParams,
    flags: &TracerFlags,
    x0: &CoefficientPair,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_rotating_frame_on(params, flags, x0, &endpoints(t_end)?, cfg)
}

/// Undo the rotating-frame substitution: `c₁ = X₁e^{−iω₁t}`,
/// `c₂ = X₂e^{iω₁t}`.
pub fn rotating_to_instantaneous(params: &FieldParams, traj: &Trajectory) -> Result<Trajectory> {
    expect_frame(traj, Frame::Rotating)?;
    let w1 = params.omega1();
    Ok(
        traj.map_samples(Frame::InstantaneousBasis, |t, x| CoefficientPair {
            c1: x.c1 * Complex64::from_polar(1.0, -w1 * t),
            c2: x.c2 * Complex64::from_polar(1.0, w1 * t),
        }),
    )
}

pub fn integrate_lab_frame_on(
    params: &FieldParams,
    psi0: &Spinor,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let y0 = [psi0[0], psi0[1]];
    let states = integrate(&LabFrameSystem::new(params), params, y0, times, cfg)?;
    Trajectory::new(
        times.to_vec(),
        to_pairs(states),
        Frame::LabSpinor,
        SolverKind::NumericLab,
    )
}

pub fn integrate_lab_frame(
    params: &FieldParams,
    psi0: &Spinor,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_lab_frame_on(params, psi0, &endpoints(t_end)?, cfg)
}

/// Lab-frame spinor at `t = 0` for instantaneous-basis coefficients `c0`.
pub fn initial_spinor(params: &FieldParams, c0: &CoefficientPair) -> Spinor {
    let eig = eigensystem_at(params, 0.0);
    eig.phi1 * c0.c1 + eig.phi2 * c0.c2
}

/// `cₙ(t) = ⟨φₙ;t|ψ(t)⟩ e^{i∫₀ᵗEₙdt′}`.
pub fn project_to_instantaneous(params: &FieldParams, traj: &Trajectory) -> Result<Trajectory> {
    expect_frame(traj, Frame::LabSpinor)?;
    let lower = SpinHalfLevel::new(params, Level::Lower);
    let upper = SpinHalfLevel::new(params, Level::Upper);
    Ok(traj.map_samples(Frame::InstantaneousBasis, |t, psi| {
        let eig = eigensystem_at(params, t);
        let psi = psi.to_spinor();
        CoefficientPair {
            c1: eig.phi1.dotc(&psi) * Complex64::from_polar(1.0, lower.phase_integral(t)),
            c2: eig.phi2.dotc(&psi) * Complex64::from_polar(1.0, upper.phase_integral(t)),
        }
    }))
}

/// Inverse of [`project_to_instantaneous`]:
/// `ψ(t) = Σₙ cₙ(t) e^{−i∫₀ᵗEₙdt′} |φₙ;t⟩`.
pub fn reconstruct_lab(params: &FieldParams, traj: &Trajectory) -> Result<Trajectory> {
    expect_frame(traj, Frame::InstantaneousBasis)?;
    let lower = SpinHalfLevel::new(params, Level::Lower);
    let upper = SpinHalfLevel::new(params, Level::Upper);
    Ok(traj.map_samples(Frame::LabSpinor, |t, c| {
        let eig = eigensystem_at(params, t);
        let psi = eig.phi1 * (c.c1 * Complex64::from_polar(1.0, -lower.phase_integral(t)))
            + eig.phi2 * (c.c2 * Complex64::from_polar(1.0, -upper.phase_integral(t)));
        CoefficientPair::from_spinor(&psi)
    }))
}

/// Lab-frame integration followed by projection: the expansion-free route
/// to the instantaneous coefficients.
pub fn lab_route_coefficients(
    params: &FieldParams,
    c0: &CoefficientPair,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let lab = integrate_lab_frame_on(params, &initial_spinor(params, c0), times, cfg)?;
    project_to_instantaneous(params, &lab)
}

fn expect_frame(traj: &Trajectory, expected: Frame) -> Result<()> {
    if traj.frame() == expected {
        Ok(())
    } else {
        Err(Error::FrameMismatch {
            expected,
            found: traj.frame(),
        })
    }
}
