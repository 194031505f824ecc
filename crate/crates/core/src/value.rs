//! Closed-form value, the antiderivative `g` and the two inequalities behind
//! the upper bound.

use serde::Serialize;

use crate::error::{HarvestError, Result};
use crate::model::ModelSpec;
use crate::psi::FundamentalSolution;
use crate::threshold::Threshold;

/// Absolute slack allowed by the generator bound.
pub const GENERATOR_TOL: f64 = 1e-9;
/// Relative slack allowed by the density bound.
pub const DENSITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    AtOrBelowBstar,
    AboveBstar,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueBreakdown {
    pub x0: f64,
    pub branch: Branch,
    /// `∫_{b*}^{x₀} f`, zero on the lower branch.
    pub sweep_term: f64,
    /// `f(b*)ψ(min(x₀, b*))/ψ′(b*)`.
    pub reflect_term: f64,
    pub total: f64,
}

/// `f(b*)ψ(b*)/ψ′(b*)`, the value of reflecting at b* from b*.
pub fn reflect_value_at_bstar(m: &ModelSpec, fs: &FundamentalSolution, th: &Threshold) -> Result<f64> {
    Ok(m.yield_at(th.bstar) * fs.psi_over_dpsi(th.bstar)?)
}

pub fn value_at(m: &ModelSpec, fs: &FundamentalSolution, th: &Threshold, x0: f64) -> Result<ValueBreakdown> {
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(HarvestError::Domain(format!("x0 = {x0} must be positive")));
    }
    let b = th.bstar;
    if x0 <= b {
        // f(b*)/ψ′(b*) · ψ(x₀); written via h_max to keep V/ψ exactly constant
        let reflect_term = th.h_max * fs.psi_at(x0)?;
        return Ok(ValueBreakdown {
            x0,
            branch: Branch::AtOrBelowBstar,
            sweep_term: 0.0,
            reflect_term,
            total: reflect_term,
        });
    }
    let sweep_term = g_at(m, th, x0)?;
    let reflect_term = reflect_value_at_bstar(m, fs, th)?;
    Ok(ValueBreakdown { x0, branch: Branch::AboveBstar, sweep_term, reflect_term, total: sweep_term + reflect_term })
}

/// `g(x) = ∫_{b*}^x f`.
pub fn g_at(m: &ModelSpec, th: &Threshold, x: f64) -> Result<f64> {
    if x < th.bstar {
        return Err(HarvestError::Domain(format!("g defined for x ≥ b* = {}, got {x}", th.bstar)));
    }
    Ok(m.yield_fn.integral(th.bstar, x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub pass: bool,
    /// Largest `lhs − rhs` (absolute for the generator bound, relative for the
    /// density bound).
    pub max_slack: f64,
    pub witness_x: f64,
    pub witness_z: f64,
    pub n_points: usize,
    pub tol: f64,
}

/// `(A − r)g ≤ r f(b*)ψ(b*)/ψ′(b*)` on `grid ⊂ (b*, x_max]`.
pub fn check_generator_bound(
    m: &ModelSpec,
    fs: &FundamentalSolution,
    th: &Threshold,
    grid: &[f64],
) -> Result<InequalityReport> {
    let rhs = m.discount * reflect_value_at_bstar(m, fs, th)?;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = th.bstar;
    for &x in grid {
        let g = g_at(m, th, x)?;
        let lhs = 0.5 * m.sigma2_at(x) * m.yield_derivative_at(x) + m.drift_at(x) * m.yield_at(x) - m.discount * g;
        let slack = lhs - rhs;
        if slack > worst {
            worst = slack;
            witness = x;
        }
    }
    Ok(InequalityReport {
        pass: grid.is_empty() || worst <= GENERATOR_TOL,
        max_slack: if grid.is_empty() { 0.0 } else { worst },
        witness_x: witness,
        witness_z: 0.0,
        n_points: grid.len(),
        tol: GENERATOR_TOL,
    })
}

/// `f(x)z/(ψ(x) − ψ(x−z)) ≤ f(b*)/ψ′(b*)`, reading `z = 0` as `f/ψ′`.
pub fn check_density_bound(
    m: &ModelSpec,
    fs: &FundamentalSolution,
    th: &Threshold,
    pairs: &[(f64, f64)],
) -> Result<InequalityReport> {
    let mut worst = f64::NEG_INFINITY;
    let (mut wx, mut wz) = (th.bstar, 0.0);
    for &(x, z) in pairs {
        let ratio = if z == 0.0 {
            m.yield_at(x) / fs.dpsi_at(x)?
        } else {
            let inc = fs.psi_increment(x, z)?;
            if !(inc > 0.0) {
                return Err(HarvestError::NotIncreasing(format!("ψ({x}) − ψ({}) = {inc}", x - z)));
            }
            m.yield_at(x) * z / inc
        };
        let rel = if th.h_max.is_infinite() { -1.0 } else { ratio / th.h_max - 1.0 };
        if rel > worst {
            worst = rel;
            wx = x;
            wz = z;
        }
    }
    Ok(InequalityReport {
        pass: pairs.is_empty() || worst <= DENSITY_TOL,
        max_slack: if pairs.is_empty() { 0.0 } else { worst },
        witness_x: wx,
        witness_z: wz,
        n_points: pairs.len(),
        tol: DENSITY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryClass, Family, YieldFn};
    use crate::psi::{solve_fundamental, GridParams};
    use crate::threshold::find_bstar;

    fn fixture() -> (ModelSpec, FundamentalSolution, Threshold) {
        let m = ModelSpec::new(Family::DriftedBm { mu: 1.0, sigma: 2f64.sqrt() }, 1.0, YieldFn::Constant { p: 1.0 })
            .unwrap();
        let fs = solve_fundamental(&m, BoundaryClass::Regular, &GridParams::default()).unwrap();
        let th = find_bstar(&m, &fs).unwrap();
        (m, fs, th)
    }

    #[test]
    fn rejects_nonpositive_x0() {
        let (m, fs, th) = fixture();
        assert!(value_at(&m, &fs, &th, 0.0).is_err());
        assert!(g_at(&m, &th, th.bstar - 0.1).is_err());
    }

    #[test]
    fn g_is_interval_length_for_constant_yield() {
        let (m, _, th) = fixture();
        assert_eq!(g_at(&m, &th, th.bstar).unwrap(), 0.0);
        assert!((g_at(&m, &th, th.bstar + 1.5).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn generator_bound_at_bstar_is_tight() {
        // f ≡ 1: (A − r)g(b*⁺) = μ = 1 and rψ(b*)/ψ′(b*) = 1
        let (m, fs, th) = fixture();
        let rep = check_generator_bound(&m, &fs, &th, &[th.bstar + 1e-12]).unwrap();
        assert!(rep.max_slack.abs() < 1e-9, "{}", rep.max_slack);
    }

    #[test]
    fn density_bound_sample() {
        let (m, fs, th) = fixture();
        let rep = check_density_bound(&m, &fs, &th, &[(2.0, 1.0), (th.bstar, 0.0)]).unwrap();
        assert!(rep.pass);
        assert!(rep.max_slack.abs() < 1e-12);
    }
}
