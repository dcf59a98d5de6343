use std::f64::consts::PI;

use adiaspin::analytic::{sine_term_reduced, AdiabaticEvolution};
use adiaspin::numeric::RotatingFrameSystem;
use adiaspin::{
    exact_coefficients, fit_scaling, CoefficientPair, Complex64, FieldParams, TracerFlags,
};
use nalgebra::{Matrix2, SymmetricEigen};
use proptest::prelude::*;

/// Real symmetric `G` with `Ẋ = −iGX` for `X₁ = c₁e^{iω₁t}`,
/// `X₂ = c₂e^{−iω₁t}`, read off the coefficient equations directly.
fn rotating_generator(p: &FieldParams, f: &TracerFlags) -> Matrix2<f64> {
    let (a, d) = ((p.theta() / 2.0).sin(), (p.theta() / 2.0).cos());
    let w0 = p.omega0();
    let b = f.a() * w0 * a * d;
    Matrix2::new(
        f.a11() * w0 * d * d - p.omega1(),
        b,
        b,
        f.a22() * w0 * a * a + p.omega1(),
    )
}

/// `exp(−iGt)X₀` through the eigendecomposition of `G`, mapped back to `c`.
fn matrix_exponential_oracle(
    p: &FieldParams,
    f: &TracerFlags,
    c0: &CoefficientPair,
    t: f64,
) -> CoefficientPair {
    let eig = SymmetricEigen::new(rotating_generator(p, f));
    let v = eig.eigenvectors;
    let x0 = [c0.c1, c0.c2];
    let mut x = [Complex64::new(0.0, 0.0); 2];
    for k in 0..2 {
        let proj = v[(0, k)] * x0[0] + v[(1, k)] * x0[1];
        let evolved = proj * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += evolved * v[(i, k)];
        }
    }
    let w1 = p.omega1();
    CoefficientPair::new(
        x[0] * Complex64::from_polar(1.0, -w1 * t),
        x[1] * Complex64::from_polar(1.0, w1 * t),
    )
}

const FLAG_VARIANTS: [TracerFlags; 4] = [
    TracerFlags::FULL,
    TracerFlags::DIAGONAL,
    TracerFlags::OFF_DIAGONAL,
    TracerFlags::NONE,
];

fn superposition() -> CoefficientPair {
    CoefficientPair::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8))
}

#[test]
fn closed_form_matches_matrix_exponential_after_one_period() {
    for theta in [PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0, 2.5] {
        for ratio in [1e-3, 1e-2, 1e-1, 1.0, 2.0] {
            let p = FieldParams::from_ratio(theta, ratio, 1.0).unwrap();
            for f in FLAG_VARIANTS
                .iter()
                .chain([&TracerFlags::new(0.3, -1.2, 2.0).unwrap()])
            {
                for c0 in [
                    CoefficientPair::LOWER,
                    CoefficientPair::UPPER,
                    superposition(),
                ] {
                    let t = p.period();
                    let got = exact_coefficients(&p, f, &c0, t);
                    let want = matrix_exponential_oracle(&p, f, &c0, t);
                    assert!(
                        got.distance(&want) < 1e-10,
                        "theta={theta} ratio={ratio} flags={f}"
                    );
                }
            }
        }
    }
}

#[test]
fn rotating_frame_generator_is_minus_i_g() {
    let p = FieldParams::from_ratio(0.8, 0.4, 1.3).unwrap();
    for f in FLAG_VARIANTS {
        let m = RotatingFrameSystem::new(&p, &f).generator();
        let g = rotating_generator(&p, &f);
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - Complex64::new(0.0, -g[(i, j)])).norm() < 1e-15);
            }
        }
    }
}

/// Near the poles the coupling `AD` vanishes and the closed form must stay
/// well behaved.
#[test]
fn near_pole_angles() {
    for theta in [1e-6, PI - 1e-6] {
        let p = FieldParams::from_ratio(theta, 0.1, 1.0).unwrap();
        let f = TracerFlags::FULL;
        for k in 0..5 {
            let t = p.period() * k as f64 / 4.0;
            let got = exact_coefficients(&p, &f, &superposition(), t);
            let want = matrix_exponential_oracle(&p, &f, &superposition(), t);
            assert!(got.distance(&want) < 1e-12);
            let ad = AdiabaticEvolution::new(&p, &f).coefficients(&superposition(), t);
            assert!(got.distance(&ad) < 1e-5);
        }
    }
}

#[test]
fn uncoupled_equations_are_frozen() {
    let p = FieldParams::from_ratio(1.0, 0.3, 1.0).unwrap();
    for t in [0.0, 1.0, 17.0, 400.0] {
        let c = exact_coefficients(&p, &TracerFlags::NONE, &superposition(), t);
        assert!(c.distance(&superposition()) < 1e-12);
    }
}

#[test]
fn adiabatic_rates_collapse_for_physical_flags() {
    let theta = 1.2f64;
    let p = FieldParams::from_ratio(theta, 0.05, 1.0).unwrap();
    let (r1, r2) = AdiabaticEvolution::new(&p, &TracerFlags::FULL).phase_rates();
    let (a, d) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    assert!((r1 + p.omega0() * d * d).abs() < 1e-15);
    assert!((r2 + p.omega0() * a * a).abs() < 1e-15);
}

/// Scaling every frequency by `k` and time by `1/k` leaves the solution
/// unchanged.
#[test]
fn larmor_frequency_only_sets_the_time_unit() {
    for f in FLAG_VARIANTS {
        let p1 = FieldParams::from_ratio(PI / 3.0, 0.1, 1.0).unwrap();
        let p10 = p1.with_omega1(10.0).unwrap();
        for k in 0..10 {
            let t = p1.period() * k as f64 / 7.0;
            let a = exact_coefficients(&p1, &f, &superposition(), t);
            let b = exact_coefficients(&p10, &f, &superposition(), t / 10.0);
            assert!(a.distance(&b) < 1e-12);
        }
    }
}

/// With `c0 = (1, 0)` and `sin Γt = 1` the dropped part of the sine terms is
/// exactly `aω₀AD/Γ`, linear in the ratio.
#[test]
fn sine_term_reduction_error_is_first_order() {
    let theta = PI / 4.0;
    let ratios = [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3];
    let points: Vec<(f64, f64)> = ratios
        .iter()
        .map(|&r| {
            let p = FieldParams::from_ratio(theta, r, 1.0).unwrap();
            let g = adiaspin::gamma(&p, &TracerFlags::FULL).gamma;
            let s = sine_term_reduced(
                &p,
                &TracerFlags::FULL,
                &CoefficientPair::LOWER,
                PI / (2.0 * g),
            )
            .unwrap();
            for k in 0..2 {
                assert!((s.bracket[k] - s.rewritten[k]).norm() < 1e-12);
            }
            (r, s.remainder())
        })
        .collect();
    let fit = fit_scaling(&points).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.01, "{}", fit.slope);
}

proptest! {
    #[test]
    fn closed_forms_are_unitary(
        theta in 0.05f64..3.09,
        log_ratio in -3.0f64..0.5,
        a11 in -2.0f64..2.0,
        a22 in -2.0f64..2.0,
        a in -2.0f64..2.0,
        t in 0.0f64..1e3,
        angle in 0.0f64..PI,
        rel in 0.0f64..(2.0 * PI),
    ) {
        let p = FieldParams::from_ratio(theta, 10f64.powf(log_ratio), 1.0).unwrap();
        let f = TracerFlags::new(a11, a22, a).unwrap();
        let c0 = CoefficientPair::new(
            Complex64::new(angle.cos(), 0.0),
            Complex64::from_polar(angle.sin(), rel),
        );
        let c = exact_coefficients(&p, &f, &c0, t);
        prop_assert!((c.norm_sqr() - 1.0).abs() < 1e-12);
        let c = AdiabaticEvolution::new(&p, &f).coefficients(&c0, t);
        prop_assert!((c.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
