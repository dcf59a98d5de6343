//! A spin-½ in a magnetic field of fixed magnitude precessing about the z
//! axis, evolved along three independent paths: the exact closed-form
//! solution of the tracer-tagged coefficient equations, their adiabatic
//! limit, and direct numerical integration. On top of these sit Berry-phase
//! extraction, Rabi-frequency decompositions and power-law scaling fits.

pub mod analytic;
pub mod error;
pub mod model;
pub mod numeric;
pub mod ode;
pub mod phase;
pub mod sweep;
pub mod trajectory;
pub mod verify;

pub use analytic::{
    adiabatic_coefficients, exact_coefficients, gamma, sine_term_reduced, AdiabaticEvolution,
    ExactEvolution, GammaDecomposition, SineTerms,
};
pub use error::{Error, IntegrationError, Result};
pub use model::{
    eigensystem_at, hamiltonian_at, magnetic_field, CoefficientPair, FieldParams, Level,
    SpinHalfEigensystem, Spinor, TracerFlags,
};
pub use numeric::{
    integrate_coefficients, integrate_lab_frame, integrate_rotating_frame, project_to_instantaneous,
};
pub use ode::{IntegratorConfig, Method};
pub use phase::{
    berry_phase, fit_scaling, rabi_decomposition, BerryRoute, PhaseReport, RabiDecomposition,
    ScalingFit,
};
pub use trajectory::{Frame, SolverKind, Trajectory};

pub use num_complex::Complex64;
