//! Discretization of the optimal harvest measure: Lebesgue measure on
//! `[b*, x₀]` at `z = 0` plus an atom of mass `ψ(b*)/ψ′(b*)` at `(b*, 0)`.

use serde::Serialize;

use crate::error::{HarvestError, Result};
use crate::model::ModelSpec;
use crate::psi::FundamentalSolution;
use crate::threshold::Threshold;
use crate::value::value_at;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mu1StarReport {
    pub x0: f64,
    pub bstar: f64,
    pub n_intervals: usize,
    pub spacing: f64,
    pub atom_weight: f64,
    /// `Σ ψ′(x_i) w_i + ψ′(b*)·atom`.
    pub constraint_lhs: f64,
    /// `ψ(x₀)`.
    pub constraint_rhs: f64,
    pub residual: f64,
    /// `Σ f(x_i) w_i + f(b*)·atom`.
    pub objective: f64,
    pub closed_form_value: f64,
    pub objective_error: f64,
}

/// Trapezoid discretization of μ₁* with `n_intervals` cells on `[b*, x₀]`.
pub fn feasibility_check_mu1star(
    m: &ModelSpec,
    fs: &FundamentalSolution,
    th: &Threshold,
    x0: f64,
    n_intervals: usize,
) -> Result<Mu1StarReport> {
    let b = th.bstar;
    if !(x0 >= b) || !(x0 > 0.0) {
        return Err(HarvestError::Domain(format!("x0 = {x0} must be positive and ≥ b* = {b}")));
    }
    if n_intervals == 0 {
        return Err(HarvestError::Config("need at least one interval".into()));
    }
    let atom_weight = fs.psi_over_dpsi(b)?;
    let mut lhs = fs.dpsi_at(b)? * atom_weight;
    let mut obj = m.yield_at(b) * atom_weight;
    let spacing = (x0 - b) / n_intervals as f64;
    if x0 > b {
        for i in 0..=n_intervals {
            let x = if i == n_intervals { x0 } else { b + i as f64 * spacing };
            let w = if i == 0 || i == n_intervals { 0.5 * spacing } else { spacing };
            lhs += fs.dpsi_at(x)? * w;
            obj += m.yield_at(x) * w;
        }
    }
    let rhs = fs.psi_at(x0)?;
    let v = value_at(m, fs, th, x0)?.total;
    Ok(Mu1StarReport {
        x0,
        bstar: b,
        n_intervals,
        spacing,
        atom_weight,
        constraint_lhs: lhs,
        constraint_rhs: rhs,
        residual: lhs - rhs,
        objective: obj,
        closed_form_value: v,
        objective_error: obj - v,
    })
}
