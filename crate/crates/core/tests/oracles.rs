//! Closed-form values worked out by hand and frozen here, checked against
//! the numerical pipeline.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use harvest_core::model::{BoundaryClass, YieldFn};
use harvest_core::montecarlo::{simulate_payoff, ReflectAt, SimConfig};
use harvest_core::oclp::{feasibility_check_mu1star, run_lp, LpMode, LpParams, LpStatus};
use harvest_core::pipeline::{fixtures, solve, solve_with};
use harvest_core::psi::{GridParams, ShootingSolver};
use harvest_core::value::value_at;

/// μ = 2, σ² = 2, r = 1, f = e^{−x}: λ± = −1 ± √2 and b* solves ψ′ + ψ″ = 0,
/// i.e. b* = ln((2+√2)/(2−√2)) / (2√2).
const STEEP_BSTAR: f64 = 0.623_225_240_140_230_5;

/// GBM μ = 0.05, σ = 0.3, r = 0.1: γ₊ of 0.045γ² + 0.005γ − 0.1 = 0.
const GBM_GAMMA: f64 = 1.436_191_286_899_728;

#[test]
fn frozen_constants_match_their_formulas() {
    let s2 = 2f64.sqrt();
    assert_relative_eq!(STEEP_BSTAR, ((2.0 + s2) / (2.0 - s2)).ln() / (2.0 * s2), max_relative = 1e-15);
    let (a, b, c) = (0.045f64, 0.005f64, -0.1f64);
    assert_relative_eq!(GBM_GAMMA, (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a), max_relative = 1e-15);
}

#[test]
fn steep_threshold_and_value() {
    let s = solve(&fixtures::drifted_bm_steep(fixtures::EXPONENTIAL), &GridParams::default()).unwrap();
    assert_abs_diff_eq!(s.threshold.bstar, STEEP_BSTAR, epsilon = 1e-8);
    let (lp, lm) = (2f64.sqrt() - 1.0, -2f64.sqrt() - 1.0);
    let psi = |x: f64| (lp * x).exp() - (lm * x).exp();
    let dpsi = |x: f64| lp * (lp * x).exp() - lm * (lm * x).exp();
    let b = STEEP_BSTAR;
    let reflect = (-b).exp() * psi(b) / dpsi(b);
    for x0 in [0.1, 0.4, b, 1.0, 2.5] {
        let want = if x0 <= b { (-b).exp() * psi(x0) / dpsi(b) } else { (-b).exp() - (-x0).exp() + reflect };
        let got = value_at(&s.model, &s.fs, &s.threshold, x0).unwrap().total;
        assert_relative_eq!(got, want, max_relative = 1e-8);
    }
}

#[test]
fn gbm_shooting_matches_power_law() {
    let m = fixtures::gbm(YieldFn::Rational { p: 1.0, alpha: 0.5 });
    let s = solve_with(&m, &ShootingSolver, &GridParams::with_x_max(20.0)).unwrap();
    assert_eq!(s.boundary, BoundaryClass::Natural);
    let c = s.fs.psi_at(1.0).unwrap();
    for x in [1e-3, 0.01, 0.3, 2.0, 7.5, 20.0] {
        assert_relative_eq!(s.fs.psi_at(x).unwrap() / c, x.powf(GBM_GAMMA), max_relative = 1e-6);
    }
}

#[test]
fn gbm_rational_yield_sweeps_everything() {
    // f/ψ′ ∝ x^{1−γ}/(1 + x/2) decreases from +∞, so b* = 0 and V = ∫₀^{x₀} f = 2 ln(1 + x₀/2)
    let m = fixtures::gbm(YieldFn::Rational { p: 1.0, alpha: 0.5 });
    let s = solve(&m, &GridParams::with_x_max(20.0)).unwrap();
    assert_eq!(s.threshold.bstar, 0.0);
    for x0 in [0.5, 1.0, 2.0] {
        let got = value_at(&s.model, &s.fs, &s.threshold, x0).unwrap().total;
        assert_relative_eq!(got, 2.0 * (1.0 + 0.5 * x0).ln(), max_relative = 1e-12);
    }
}

#[test]
fn logistic_threshold_is_stable_under_refinement() {
    let m = fixtures::logistic(fixtures::CONSTANT);
    let coarse = solve(&m, &GridParams::default()).unwrap();
    let fine = solve(&m, &GridParams { n_lin: 1600, n_log: 480, ..GridParams::default() }).unwrap();
    assert_eq!(coarse.boundary, BoundaryClass::Natural);
    assert!(coarse.threshold.report.all_ok());
    assert!(coarse.threshold.bstar > 0.0 && coarse.threshold.bstar < 1.0);
    assert_abs_diff_eq!(coarse.threshold.bstar, fine.threshold.bstar, epsilon = 1e-6);
    assert!(coarse.fs.worst_midpoint_residual().0 <= 1e-6);
}

#[test]
fn aux_lp_is_exact_below_steep_threshold() {
    let s = solve(&fixtures::drifted_bm_steep(fixtures::EXPONENTIAL), &GridParams::default()).unwrap();
    let (m, fs, th) = (&s.model, &s.fs, &s.threshold);
    for x0 in [0.2, 0.5 * th.bstar, th.bstar] {
        let rep = run_lp(m, fs, th, x0, LpMode::Aux, &LpParams::default()).unwrap();
        assert_eq!(rep.status, LpStatus::Optimal);
        assert_relative_eq!(rep.value, rep.closed_form_value, max_relative = 1e-6);
    }
}

#[test]
fn full_lp_brackets_value_on_logistic() {
    let s = solve(&fixtures::logistic(fixtures::CONSTANT), &GridParams::default()).unwrap();
    let (m, fs, th) = (&s.model, &s.fs, &s.threshold);
    let p = LpParams { n_states: 240, n_splines: 80, ..LpParams::default() };
    for x0 in [0.5 * th.bstar, 0.6] {
        let full = run_lp(m, fs, th, x0, LpMode::Full, &p).unwrap();
        let aux = run_lp(m, fs, th, x0, LpMode::Aux, &p).unwrap();
        assert_eq!(full.status, LpStatus::Optimal);
        assert!(full.value >= full.closed_form_value - 1e-6, "{} < {}", full.value, full.closed_form_value);
        assert!(full.value <= aux.value + 1e-6);
    }
}

#[test]
fn mu1star_on_logistic_is_second_order() {
    let s = solve(&fixtures::logistic(fixtures::CONSTANT), &GridParams::default()).unwrap();
    let (m, fs, th) = (&s.model, &s.fs, &s.threshold);
    let x0 = 0.6;
    let r: Vec<f64> =
        [32, 64].iter().map(|&n| feasibility_check_mu1star(m, fs, th, x0, n).unwrap().residual.abs()).collect();
    assert!(r[0] / r[1] > 3.9, "ratio {}", r[0] / r[1]);
    let fine = feasibility_check_mu1star(m, fs, th, x0, 1 << 14).unwrap();
    assert_abs_diff_eq!(fine.objective, fine.closed_form_value, epsilon = 1e-8);
}

#[test]
fn reflected_income_matches_closed_form_on_logistic() {
    let s = solve(&fixtures::logistic(fixtures::CONSTANT), &GridParams::default()).unwrap();
    let (m, th) = (&s.model, &s.threshold);
    let want = value_at(m, &s.fs, th, th.bstar).unwrap().total;
    let cfg = SimConfig::new(1e-3, 1e4f64.ln() / m.discount, 4000, 11);
    let got = simulate_payoff(m, &ReflectAt { b: th.bstar }, th.bstar, &cfg).unwrap();
    assert!((got.mean - want).abs() <= (3.0 * got.stderr).max(0.015 * want), "{} vs {want}", got.mean);
}
