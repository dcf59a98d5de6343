//! Closed-form evolution of the tracer-tagged coefficient equations
//!
//! ```text
//! ċ₁ = −i a₁₁ ω₀ D² c₁ − i a ω₀ A D e^{−2iω₁t} c₂
//! ċ₂ = −i a ω₀ A D e^{2iω₁t} c₁ − i a₂₂ ω₀ A² c₂
//! ```
//!
//! and of their adiabatic limit. In the rotating frame the system has the
//! constant generator `−i(s·1 + K)` with `s = (ω₀/2)(a₁₁D² + a₂₂A²)` and
//! `K = [[−δ, b], [b, δ]]`, where `δ = ω₁ + (ω₀/2)(a₂₂A² − a₁₁D²)` and
//! `b = a ω₀ A D`. `K` has eigenvalues `±Γ`, `Γ = √(δ² + b²)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CoefficientPair, FieldParams, TracerFlags};
use crate::trajectory::{validate_grid, Frame, SolverKind, Trajectory};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Rabi frequency and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaDecomposition {
    /// `Γ`, the non-negative root.
    pub gamma: f64,
    /// `Γ^{a.a.} = ω₁ + diagonal_shift`, signed.
    pub gamma_aa: f64,
    /// `(ω₀/2)(a₂₂A² − a₁₁D²)`.
    pub diagonal_shift: f64,
    /// `a²(ω₀/ω₁)²A²D²`, the dimensionless off-diagonal term under the root.
    pub offdiag_term: f64,
}

pub fn gamma(params: &FieldParams, flags: &TracerFlags) -> GammaDecomposition {
    let g = Generator::new(params, flags);
    let ad = params.a() * params.d();
    let r = flags.a() * params.ratio() * ad;
    GammaDecomposition {
        gamma: g.gamma,
        gamma_aa: g.delta,
        diagonal_shift: g.delta - params.omega1(),
        offdiag_term: r * r,
    }
}

/// Rotating-frame generator data shared by the closed forms.
#[derive(Debug, Clone, Copy)]
struct Generator {
    omega1: f64,
    /// Mean diagonal shift `s`.
    shift: f64,
    delta: f64,
    coupling: f64,
    gamma: f64,
}

impl Generator {
    fn new(params: &FieldParams, flags: &TracerFlags) -> Self {
        let w0 = params.omega0();
        let w1 = params.omega1();
        let a2 = params.a().powi(2);
        let d2 = params.d().powi(2);
        let delta = w1 + 0.5 * w0 * (flags.a22() * a2 - flags.a11() * d2);
        let coupling = flags.a() * w0 * params.a() * params.d();
        Self {
            omega1: w1,
            shift: 0.5 * w0 * (flags.a11() * d2 + flags.a22() * a2),
            delta,
            coupling,
            gamma: delta.hypot(coupling),
        }
    }

    /// `(cos Γt, sin(Γt)/Γ)`, continuous through `Γ = 0`.
    fn oscillation(&self, t: f64) -> (f64, f64) {
        let x = self.gamma * t;
        let sinc = if x.abs() < 1e-8 {
            t * (1.0 - x * x / 6.0)
        } else {
            x.sin() / self.gamma
        };
        (x.cos(), sinc)
    }
}

/// Evaluator for the exact tracer solution at fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct ExactEvolution {
    generator: Generator,
    sine_sign: f64,
}

impl ExactEvolution {
    pub fn new(params: &FieldParams, flags: &TracerFlags) -> Self {
        Self {
            generator: Generator::new(params, flags),
            sine_sign: 1.0,
        }
    }

    /// Flip the sign of both sine terms. Only used to check that the
    /// verification suite notices a broken closed form.
    pub(crate) fn with_flipped_sine(mut self) -> Self {
        self.sine_sign = -self.sine_sign;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.generator.gamma
    }

    pub fn coefficients(&self, c0: &CoefficientPair, t: f64) -> CoefficientPair {
        let g = &self.generator;
        let (cos, sinc) = g.oscillation(t);
        let sine = I * (self.sine_sign * sinc);
        let env1 = Complex64::from_polar(1.0, -(g.omega1 + g.shift) * t);
        let env2 = Complex64::from_polar(1.0, (g.omega1 - g.shift) * t);
        let c1 = env1 * (c0.c1 * cos + sine * (c0.c1 * g.delta - c0.c2 * g.coupling));
        let c2 = env2 * (c0.c2 * cos - sine * (c0.c2 * g.delta + c0.c1 * g.coupling));
        CoefficientPair { c1, c2 }
    }

    pub fn trajectory(&self, c0: &CoefficientPair, times: &[f64]) -> Result<Trajectory> {
        validate_grid(times)?;
        let samples = times.iter().map(|&t| self.coefficients(c0, t)).collect();
        Trajectory::new(
            times.to_vec(),
            samples,
            Frame::InstantaneousBasis,
            SolverKind::Exact,
        )
    }
}

/// Exact `(c₁(t), c₂(t))` of the tracer-tagged equations for initial
/// coefficients `c0`.
pub fn exact_coefficients(
    params: &FieldParams,
    flags: &TracerFlags,
    c0: &CoefficientPair,
    t: f64,
) -> CoefficientPair {
    ExactEvolution::new(params, flags).coefficients(c0, t)
}

/// Sine terms of the exact solution and their zeroth-order reduction in
/// `ω₀/Γ`. Index 0 belongs to `c₁`, index 1 to `c₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineTerms {
    /// `±i sin(Γt)/Γ [δ cₙ(0) ∓ b cₘ(0)]`, as it appears in the solution.
    pub bracket: [Complex64; 2],
    /// Same term written with `√(1 − a²(ω₀/Γ)²A²D²)` in place of `δ/Γ`.
    pub rewritten: [Complex64; 2],
    /// `±i cₙ(0) sin(Γt)`.
    pub reduced: [Complex64; 2],
}

impl SineTerms {
    /// Largest magnitude of `rewritten − reduced`, the dropped remainder.
    pub fn remainder(&self) -> f64 {
        (self.rewritten[0] - self.reduced[0])
            .norm()
            .max((self.rewritten[1] - self.reduced[1]).norm())
    }
}

pub fn sine_term_reduced(
    params: &FieldParams,
    flags: &TracerFlags,
    c0: &CoefficientPair,
    t: f64,
) -> Result<SineTerms> {
    let g = Generator::new(params, flags);
    let small = params.omega0() / g.gamma;
    if small.is_nan() || small >= 1.0 {
        return Err(Error::ReductionNotMeaningful(small));
    }
    let (_, sinc) = g.oscillation(t);
    let sin = sinc * g.gamma;
    let is = I * sin;
    let x = flags.a() * small * params.a() * params.d();
    let root = (1.0 - x * x).sqrt();
    Ok(SineTerms {
        bracket: [
            I * sinc * (c0.c1 * g.delta - c0.c2 * g.coupling),
            -I * sinc * (c0.c2 * g.delta + c0.c1 * g.coupling),
        ],
        rewritten: [
            is * (c0.c1 * root - c0.c2 * x),
            -is * (c0.c2 * root + c0.c1 * x),
        ],
        reduced: [is * c0.c1, -is * c0.c2],
    })
}

/// Evaluator for the adiabatic-limit coefficients.
#[derive(Debug, Clone, Copy)]
pub struct AdiabaticEvolution {
    rate1: f64,
    rate2: f64,
}

impl AdiabaticEvolution {
    pub fn new(params: &FieldParams, flags: &TracerFlags) -> Self {
        let g = Generator::new(params, flags);
        Self {
            rate1: -(g.omega1 + g.shift - g.delta),
            rate2: g.omega1 - g.shift - g.delta,
        }
    }

    /// Angular rates of the pure phases of `c₁` and `c₂`.
    pub fn phase_rates(&self) -> (f64, f64) {
        (self.rate1, self.rate2)
    }

    pub fn coefficients(&self, c0: &CoefficientPair, t: f64) -> CoefficientPair {
        CoefficientPair {
            c1: Complex64::from_polar(1.0, self.rate1 * t) * c0.c1,
            c2: Complex64::from_polar(1.0, self.rate2 * t) * c0.c2,
        }
    }

    pub fn trajectory(&self, c0: &CoefficientPair, times: &[f64]) -> Result<Trajectory> {
        validate_grid(times)?;
        let samples = times.iter().map(|&t| self.coefficients(c0, t)).collect();
        Trajectory::new(
            times.to_vec(),
            samples,
            Frame::InstantaneousBasis,
            SolverKind::Adiabatic,
        )
    }
}

/// Adiabatic-limit coefficients: each amplitude keeps its modulus and
/// acquires a phase linear in `t`.
pub fn adiabatic_coefficients(
    params: &FieldParams,
    flags: &TracerFlags,
    c0: &CoefficientPair,
    t: f64,
) -> CoefficientPair {
    AdiabaticEvolution::new(params, flags).coefficients(c0, t)
}
