//! Spin-1/2 coupled to a magnetic field of constant magnitude precessing
//! about the z axis.
//!
//! Units: ħ = 1. The Hamiltonian is `H(t) = ω₁ n̂(t)·σ`, so the level
//! splitting is `2ω₁` and the instantaneous energies are `∓ω₁`. Spinors are
//! written in the `(|↑⟩, |↓⟩)` basis of `s_z`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Spinor = Vector2<Complex64>;
pub type Operator = Matrix2<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Field geometry and the two characteristic frequencies of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldParams {
    theta: f64,
    omega0: f64,
    omega1: f64,
    field_strength: f64,
}

impl FieldParams {
    /// `theta` is the cone half-angle, `omega0` the precession (drive)
    /// frequency and `omega1` half the level splitting.
    pub fn new(theta: f64, omega0: f64, omega1: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0 && theta < PI) {
            return Err(Error::ThetaOutOfRange(theta));
        }
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(Error::InvalidDriveFrequency(omega0));
        }
        if !(omega1.is_finite() && omega1 > 0.0) {
            return Err(Error::InvalidSplitting(omega1));
        }
        Ok(Self {
            theta,
            omega0,
            omega1,
            field_strength: 1.0,
        })
    }

    /// Parametrize by the adiabaticity ratio `omega0 / omega1`.
    pub fn from_ratio(theta: f64, ratio: f64, omega1: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio >= 0.0) {
            return Err(Error::InvalidDriveFrequency(ratio * omega1));
        }
        Self::new(theta, ratio * omega1, omega1)
    }

    /// Build from the magnetic moment `mu` and field magnitude `b`, with
    /// `2 omega1 = mu b`.
    pub fn from_moment(theta: f64, omega0: f64, mu: f64, b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidSplitting(0.5 * mu * b));
        }
        let mut params = Self::new(theta, omega0, 0.5 * mu * b)?;
        params.field_strength = b;
        Ok(params)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    /// Magnitude `B` of the field. Only enters [`magnetic_field`]; the
    /// dynamics depend on `omega1` alone.
    pub fn field_strength(&self) -> f64 {
        self.field_strength
    }

    pub fn ratio(&self) -> f64 {
        self.omega0 / self.omega1
    }

    /// Drive period `2π/ω₀`; infinite for a static field.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega0
    }

    /// `A = sin(θ/2)`.
    pub fn a(&self) -> f64 {
        (0.5 * self.theta).sin()
    }

    /// `D = cos(θ/2)`.
    pub fn d(&self) -> f64 {
        (0.5 * self.theta).cos()
    }

    pub fn with_omega1(&self, omega1: f64) -> Result<Self> {
        Self::from_ratio(self.theta, self.ratio(), omega1)
    }
}

/// Multipliers on the diagonal (`a11`, `a22`) and off-diagonal (`a`) terms
/// of the coefficient equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracerFlags {
    a11: f64,
    a22: f64,
    a: f64,
}

impl TracerFlags {
    /// The physical equations.
    pub const FULL: Self = Self::raw(1.0, 1.0, 1.0);
    /// Off-diagonal coupling switched off.
    pub const DIAGONAL: Self = Self::raw(1.0, 1.0, 0.0);
    pub const OFF_DIAGONAL: Self = Self::raw(0.0, 0.0, 1.0);
    pub const NONE: Self = Self::raw(0.0, 0.0, 0.0);

    const fn raw(a11: f64, a22: f64, a: f64) -> Self {
        Self { a11, a22, a }
    }

    pub fn new(a11: f64, a22: f64, a: f64) -> Result<Self> {
        for (name, value) in [("a11", a11), ("a22", a22), ("a", a)] {
            if !value.is_finite() {
                return Err(Error::NonFiniteFlag { name, value });
            }
        }
        Ok(Self { a11, a22, a })
    }

    pub fn a11(&self) -> f64 {
        self.a11
    }

    pub fn a22(&self) -> f64 {
        self.a22
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn with_offdiagonal(&self, a: f64) -> Self {
        Self { a, ..*self }
    }
}

impl fmt::Display for TracerFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.a11, self.a22, self.a)
    }
}

/// Amplitudes `(c₁, c₂)` on the instantaneous eigenbasis. Lab-frame
/// trajectories reuse the type for the `(↑, ↓)` components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPair {
    pub c1: Complex64,
    pub c2: Complex64,
}

impl CoefficientPair {
    pub const LOWER: Self = Self {
        c1: Complex64::new(1.0, 0.0),
        c2: Complex64::new(0.0, 0.0),
    };
    pub const UPPER: Self = Self {
        c1: Complex64::new(0.0, 0.0),
        c2: Complex64::new(1.0, 0.0),
    };

    pub fn new(c1: Complex64, c2: Complex64) -> Self {
        Self { c1, c2 }
    }

    /// Construct and check `|c1|² + |c2|² = 1` within `tol`.
    pub fn normalized(c1: Complex64, c2: Complex64, tol: f64) -> Result<Self> {
        let pair = Self { c1, c2 };
        pair.ensure_normalized(tol)?;
        Ok(pair)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c1.norm_sqr() + self.c2.norm_sqr()
    }

    pub fn ensure_normalized(&self, tol: f64) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() <= tol {
            Ok(())
        } else {
            Err(Error::NotNormalized(n))
        }
    }

    /// Euclidean distance in C².
    pub fn distance(&self, other: &Self) -> f64 {
        ((self.c1 - other.c1).norm_sqr() + (self.c2 - other.c2).norm_sqr()).sqrt()
    }

    pub fn get(&self, level: Level) -> Complex64 {
        match level {
            Level::Lower => self.c1,
            Level::Upper => self.c2,
        }
    }

    pub fn to_array(self) -> [Complex64; 2] {
        [self.c1, self.c2]
    }

    pub fn from_array([c1, c2]: [Complex64; 2]) -> Self {
        Self { c1, c2 }
    }

    pub fn to_spinor(self) -> Spinor {
        Spinor::new(self.c1, self.c2)
    }

    pub fn from_spinor(s: &Spinor) -> Self {
        Self { c1: s[0], c2: s[1] }
    }
}

/// Instantaneous eigenstate label: `Lower` is `φ₁` (energy `−ω₁`, spin down
/// along the field), `Upper` is `φ₂` (energy `+ω₁`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Lower,
    Upper,
}

impl Level {
    pub const BOTH: [Level; 2] = [Level::Lower, Level::Upper];

    /// 1 or 2.
    pub fn index(self) -> u8 {
        match self {
            Level::Lower => 1,
            Level::Upper => 2,
        }
    }

    pub fn from_index(n: u8) -> Option<Self> {
        match n {
            1 => Some(Level::Lower),
            2 => Some(Level::Upper),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Level::Lower => Level::Upper,
            Level::Upper => Level::Lower,
        }
    }

    /// Energy of the level in units where ħ = 1.
    pub fn energy(self, params: &FieldParams) -> f64 {
        match self {
            Level::Lower => -params.omega1(),
            Level::Upper => params.omega1(),
        }
    }

    pub fn initial_coefficients(self) -> CoefficientPair {
        match self {
            Level::Lower => CoefficientPair::LOWER,
            Level::Upper => CoefficientPair::UPPER,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Instantaneous eigensystem of `H(t)`.
///
/// The phase convention is fixed: `φ₁ = (−A, D e^{iω₀t})`,
/// `φ₂ = (D, A e^{iω₀t})`. The geometric phase bookkeeping relies on it, so
/// the spinors are never re-gauged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinHalfEigensystem {
    pub a: f64,
    pub d: f64,
    pub e1: f64,
    pub e2: f64,
    pub phi1: Spinor,
    pub phi2: Spinor,
}

impl SpinHalfEigensystem {
    pub fn state(&self, level: Level) -> &Spinor {
        match level {
            Level::Lower => &self.phi1,
            Level::Upper => &self.phi2,
        }
    }

    pub fn energy(&self, level: Level) -> f64 {
        match level {
            Level::Lower => self.e1,
            Level::Upper => self.e2,
        }
    }
}

/// `B(t) = B (sinθ cos ω₀t, sinθ sin ω₀t, cosθ)`.
pub fn magnetic_field(params: &FieldParams, t: f64) -> [f64; 3] {
    let b = params.field_strength();
    let (st, ct) = params.theta().sin_cos();
    let (sp, cp) = (params.omega0() * t).sin_cos();
    [b * st * cp, b * st * sp, b * ct]
}

/// `H(t) = ω₁ n̂(t)·σ`.
pub fn hamiltonian_at(params: &FieldParams, t: f64) -> Operator {
    let w1 = params.omega1();
    let (st, ct) = params.theta().sin_cos();
    let phase = Complex64::from_polar(1.0, params.omega0() * t);
    let off = phase * (w1 * st);
    Operator::new(
        Complex64::from(w1 * ct),
        off.conj(),
        off,
        Complex64::from(-w1 * ct),
    )
}

/// Analytic `∂H/∂t`.
pub fn hamiltonian_rate(params: &FieldParams, t: f64) -> Operator {
    let w0 = params.omega0();
    let phase = Complex64::from_polar(1.0, w0 * t);
    let off = I * phase * (params.omega1() * w0 * params.theta().sin());
    let zero = Complex64::from(0.0);
    Operator::new(zero, off.conj(), off, zero)
}

pub fn eigensystem_at(params: &FieldParams, t: f64) -> SpinHalfEigensystem {
    let a = params.a();
    let d = params.d();
    let phase = Complex64::from_polar(1.0, params.omega0() * t);
    SpinHalfEigensystem {
        a,
        d,
        e1: Level::Lower.energy(params),
        e2: Level::Upper.energy(params),
        phi1: Spinor::new(Complex64::from(-a), phase * d),
        phi2: Spinor::new(Complex64::from(d), phase * a),
    }
}

/// Residuals of the adiabatic-elimination identity
/// `⟨φ₁|∂ₜφ₂⟩ = −⟨φ₁|∂ₜH|φ₂⟩ / (E₁ − E₂)` at time `t`, with `∂ₜφ₂` taken by
/// central differences of step `h`.
///
/// Returns `(lhs, rhs)`.
pub fn coupling_identity(params: &FieldParams, t: f64, h: f64) -> (Complex64, Complex64) {
    let here = eigensystem_at(params, t);
    let ahead = eigensystem_at(params, t + h);
    let behind = eigensystem_at(params, t - h);
    let dphi2 = (ahead.phi2 - behind.phi2) / Complex64::from(2.0 * h);
    let lhs = here.phi1.dotc(&dphi2);
    let rate = hamiltonian_rate(params, t);
    let rhs = -here.phi1.dotc(&(rate * here.phi2)) / (here.e1 - here.e2);
    (lhs, rhs)
}

/// Finite-difference step for [`coupling_identity`]: `10⁻⁶` of a drive
/// period.
pub fn coupling_identity_step(params: &FieldParams) -> f64 {
    1e-6 * params.period()
}
