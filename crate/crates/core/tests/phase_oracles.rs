use std::f64::consts::PI;

use adiaspin::phase::{expected_geometric_phase, rabi_decomposition, unwrap_phases, wrap_phase};
use adiaspin::{berry_phase, fit_scaling, BerryRoute, FieldParams, Level, TracerFlags};

fn wrapped_gap(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

#[test]
fn adiabatic_geometric_phases_and_sum_rule() {
    for k in 1..=5 {
        let theta = PI * k as f64 / 6.0;
        let p = FieldParams::from_ratio(theta, 0.01, 1.0).unwrap();
        let g1 = berry_phase(&p, Level::Lower, BerryRoute::AdiabaticClosedForm).unwrap();
        let g2 = berry_phase(&p, Level::Upper, BerryRoute::AdiabaticClosedForm).unwrap();
        assert!(wrapped_gap(g1.geometric_phase, -PI * (1.0 + theta.cos())) < 1e-10);
        assert!(wrapped_gap(g2.geometric_phase, -PI * (1.0 - theta.cos())) < 1e-10);
        assert!(wrapped_gap(g1.geometric_phase + g2.geometric_phase, 0.0) < 1e-10);
        assert!(!g1.leakage_warning && g1.residual_mixing == 0.0);
        assert!(
            wrapped_gap(
                expected_geometric_phase(theta, Level::Upper),
                -PI * (1.0 - theta.cos())
            ) < 1e-15
        );
    }
}

#[test]
fn numeric_lab_route_near_adiabatic_limit() {
    let theta = PI / 3.0;
    let p = FieldParams::from_ratio(theta, 1e-3, 1.0).unwrap();
    for state in Level::BOTH {
        let r = berry_phase(&p, state, BerryRoute::NumericLab).unwrap();
        assert!(wrapped_gap(r.geometric_phase, expected_geometric_phase(theta, state)) < 1e-2);
        let lab_phase = r.lab_phase();
        assert!((lab_phase - r.total_phase - r.dynamical_phase).abs() < 1e-9);
    }
}

#[test]
fn exact_route_error_shrinks_with_ratio() {
    let theta = PI / 4.0;
    let points: Vec<(f64, f64)> = [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3]
        .into_iter()
        .map(|r| {
            let p = FieldParams::from_ratio(theta, r, 1.0).unwrap();
            let g = berry_phase(&p, Level::Lower, BerryRoute::ExactClosedForm).unwrap();
            (
                r,
                wrapped_gap(
                    g.geometric_phase,
                    expected_geometric_phase(theta, Level::Lower),
                ),
            )
        })
        .collect();
    let fit = fit_scaling(&points).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.15, "{}", fit.slope);
}

#[test]
fn strong_driving_triggers_leakage_warning() {
    let p = FieldParams::from_ratio(PI / 2.0, 1.5, 1.0).unwrap();
    let r = berry_phase(&p, Level::Lower, BerryRoute::ExactClosedForm).unwrap();
    assert!(r.leakage_warning, "mixing {}", r.residual_mixing);
}

#[test]
fn rabi_contributions_scale_as_claimed() {
    let ratios = [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3];
    let series = |pick: fn(&adiaspin::RabiDecomposition) -> f64| {
        let pts: Vec<(f64, f64)> = ratios
            .iter()
            .map(|&r| {
                let p = FieldParams::from_ratio(PI / 4.0, r, 1.0).unwrap();
                (r, pick(&rabi_decomposition(&p, &TracerFlags::FULL)).abs())
            })
            .collect();
        fit_scaling(&pts).unwrap().slope
    };
    assert!((series(|d| d.diagonal_rel) - 1.0).abs() < 0.05);
    assert!((series(|d| d.nondiagonal_rel) - 2.0).abs() < 0.1);
}

#[test]
fn unwrapping_a_sampled_rotor() {
    let rate = -2.7;
    let truth: Vec<f64> = (0..400).map(|k| rate * 0.1 * k as f64).collect();
    let wrapped: Vec<f64> = truth.iter().map(|&p| wrap_phase(p)).collect();
    let unwrapped = unwrap_phases(&wrapped);
    for (u, t) in unwrapped.iter().zip(&truth) {
        assert!((u - t).abs() < 1e-9);
    }
}
