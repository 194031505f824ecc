//! Classify → ψ → b* in one call, plus the reference models used throughout
//! the tests and the CLI demos.

use serde::Serialize;

use crate::error::Result;
use crate::model::{BoundaryClass, Family, IntegrationParams, ModelSpec, YieldFn};
use crate::psi::{AutoSolver, FundamentalSolution, GridParams, PsiSolver};
use crate::threshold::{find_bstar, Threshold};

#[derive(Debug, Clone)]
pub struct Solved {
    pub model: ModelSpec,
    pub boundary: BoundaryClass,
    pub fs: FundamentalSolution,
    pub threshold: Threshold,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolvedSummary {
    pub boundary: BoundaryClass,
    pub bstar: f64,
    pub h_max: f64,
    pub closed_form: bool,
    pub grid_nodes: usize,
    pub x_max: f64,
}

impl Solved {
    pub fn summary(&self) -> SolvedSummary {
        SolvedSummary {
            boundary: self.boundary,
            bstar: self.threshold.bstar,
            h_max: self.threshold.h_max,
            closed_form: self.fs.closed_form().is_some(),
            grid_nodes: self.fs.grid().len(),
            x_max: self.fs.x_max(),
        }
    }
}

/// Computational right end for ψ: `10·max(scale, x₀ …)`.
pub fn default_x_max(m: &ModelSpec, x0s: &[f64]) -> f64 {
    10.0 * x0s.iter().copied().fold(m.scale(), f64::max)
}

pub fn solve(m: &ModelSpec, gp: &GridParams) -> Result<Solved> {
    solve_with(m, &AutoSolver, gp)
}

/// As [`solve`], with ψ produced by `solver`.
pub fn solve_with(m: &ModelSpec, solver: &dyn PsiSolver, gp: &GridParams) -> Result<Solved> {
    m.validate()?;
    let boundary = m.classify_boundary_zero(&IntegrationParams::default())?;
    let fs = solver.solve(m, boundary, gp)?;
    let threshold = find_bstar(m, &fs)?;
    Ok(Solved { model: *m, boundary, fs, threshold })
}

/// Reference models.
pub mod fixtures {
    use super::*;

    /// Drifted Brownian motion μ = 1, σ = √2, r = 1 (λ± = (−1 ± √5)/2).
    pub fn drifted_bm(yield_fn: YieldFn) -> ModelSpec {
        ModelSpec::new(Family::DriftedBm { mu: 1.0, sigma: 2f64.sqrt() }, 1.0, yield_fn).expect("valid fixture")
    }

    /// Drifted Brownian motion μ = 2, σ = √2, r = 1 (λ± = −1 ± √2), where an
    /// exponential yield gives an interior threshold.
    pub fn drifted_bm_steep(yield_fn: YieldFn) -> ModelSpec {
        ModelSpec::new(Family::DriftedBm { mu: 2.0, sigma: 2f64.sqrt() }, 1.0, yield_fn).expect("valid fixture")
    }

    /// GBM μ = 0.05, σ = 0.3, r = 0.1.
    pub fn gbm(yield_fn: YieldFn) -> ModelSpec {
        ModelSpec::new(Family::Gbm { mu: 0.05, sigma: 0.3 }, 0.1, yield_fn).expect("valid fixture")
    }

    /// Logistic μ = 1, K = 1, σ = 0.2, r = 0.5.
    pub fn logistic(yield_fn: YieldFn) -> ModelSpec {
        ModelSpec::new(Family::Logistic { mu: 1.0, k: 1.0, sigma: 0.2 }, 0.5, yield_fn).expect("valid fixture")
    }

    pub const CONSTANT: YieldFn = YieldFn::Constant { p: 1.0 };
    pub const EXPONENTIAL: YieldFn = YieldFn::Exponential { p: 1.0, alpha: 1.0 };
}
