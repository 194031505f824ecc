//! Finite occupation-measure linear programs.
//!
//! The full program carries one equality row per test function plus the two
//! mass bounds; the auxiliary program keeps only the ψ row and the harvest
//! measure.

pub mod basis;
pub mod mu1star;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{HarvestError, Result};
use crate::model::ModelSpec;
use crate::psi::FundamentalSolution;
use crate::threshold::Threshold;
use crate::value::value_at;

pub use basis::TestFunctionBasis;
pub use mu1star::{feasibility_check_mu1star, Mu1StarReport};
pub use simplex::{solve_lp, LPSolution, LpStatus, RowActivity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

/// What an LP column stands for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum Variable {
    /// Discounted exit distribution μ_τ.
    Tau { x: f64 },
    /// Discounted occupation μ₀.
    Occupation { x: f64 },
    /// Harvest measure μ₁ at `(x, z)`.
    Harvest { x: f64, z: f64 },
    Other { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LPInstance {
    /// Row-major, `rhs.len() × objective.len()`.
    pub a: Vec<f64>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub objective: Vec<f64>,
    pub row_names: Vec<String>,
    pub vars: Vec<Variable>,
}

impl LPInstance {
    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn coef(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n_cols() + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureGrid {
    pub states: Vec<f64>,
    /// Jump sizes per state: 0 then geometric levels up to the state itself.
    pub jumps: Vec<Vec<f64>>,
}

/// Smallest nonzero jump as a fraction of the state.
pub const Z_MIN_REL: f64 = 1e-6;
/// Largest `ψ(x_max)/ψ(max(x₀, b*))` the LP domain may span.
pub const PSI_RANGE_CAP: f64 = 1e3;

impl MeasureGrid {
    /// `n_states` uniform nodes on `(0, x_max]`, with each of `pinned` placed
    /// exactly (replacing a uniform node closer than a quarter spacing).
    pub fn new(x_max: f64, n_states: usize, jump_levels: usize, pinned: &[f64]) -> Result<Self> {
        if !(x_max > 0.0) || !x_max.is_finite() || n_states == 0 {
            return Err(HarvestError::LpBuild(format!("bad grid: x_max = {x_max}, n = {n_states}")));
        }
        if jump_levels < 2 {
            return Err(HarvestError::LpBuild("need at least two jump levels".into()));
        }
        let h = x_max / n_states as f64;
        let pins: Vec<f64> = pinned.iter().copied().filter(|&p| p > 0.0).collect();
        if let Some(p) = pins.iter().find(|&&p| p > x_max) {
            return Err(HarvestError::LpBuild(format!("pinned node {p} beyond x_max = {x_max}")));
        }
        let mut states: Vec<f64> = (1..=n_states)
            .map(|i| i as f64 * h)
            .filter(|x| pins.iter().all(|p| (x - p).abs() >= 0.25 * h))
            .collect();
        states.extend(&pins);
        states.sort_by(f64::total_cmp);
        states.dedup();
        let jumps = states
            .iter()
            .map(|&x| {
                let zmin = Z_MIN_REL * x;
                let mut z = vec![0.0];
                z.extend((0..jump_levels).map(|j| {
                    if j + 1 == jump_levels { x } else { zmin * (x / zmin).powf(j as f64 / (jump_levels - 1) as f64) }
                }));
                z
            })
            .collect();
        Ok(Self { states, jumps })
    }

    /// `max(4x₀, 4b*, 10·scale)`.
    pub fn default_x_max(m: &ModelSpec, x0: f64, bstar: f64) -> f64 {
        (4.0 * x0).max(4.0 * bstar).max(10.0 * m.scale())
    }

    /// Default right end, shortened where ψ would span more than
    /// [`PSI_RANGE_CAP`] beyond `max(x₀, b*)`; the ψ row is meaningless in
    /// double precision past that point. Never below `2·max(x₀, b*)`.
    pub fn lp_x_max(m: &ModelSpec, fs: &FundamentalSolution, x0: f64, bstar: f64) -> Result<f64> {
        let hi = Self::default_x_max(m, x0, bstar).min(fs.x_max());
        let anchor = x0.max(bstar);
        let cap = PSI_RANGE_CAP * fs.psi_at(anchor)?;
        if fs.psi_at(hi)? <= cap {
            return Ok(hi);
        }
        let (mut lo, mut up) = ((2.0 * anchor).min(hi), hi);
        if fs.psi_at(lo)? >= cap {
            return Ok(lo);
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + up);
            if fs.psi_at(mid)? <= cap {
                lo = mid;
            } else {
                up = mid;
            }
        }
        Ok(lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.states.iter().any(|&s| s == x)
    }

    pub fn n_harvest(&self) -> usize {
        self.jumps.iter().map(Vec::len).sum()
    }

    fn harvest_vars(&self) -> Vec<Variable> {
        self.states
            .iter()
            .zip(&self.jumps)
            .flat_map(|(&x, zs)| zs.iter().map(move |&z| Variable::Harvest { x, z }))
            .collect()
    }

    /// Column layout of the full program: μ_τ at 0 and every state, μ₀ at
    /// every state, then μ₁ state by state.
    pub fn full_vars(&self) -> Vec<Variable> {
        let mut v = vec![Variable::Tau { x: 0.0 }];
        v.extend(self.states.iter().map(|&x| Variable::Tau { x }));
        v.extend(self.states.iter().map(|&x| Variable::Occupation { x }));
        v.extend(self.harvest_vars());
        v
    }
}

fn check_x0_on_grid(grid: &MeasureGrid, x0: f64) -> Result<()> {
    if !(x0 > 0.0) {
        return Err(HarvestError::Domain(format!("x0 = {x0} must be positive")));
    }
    if !grid.contains(x0) {
        return Err(HarvestError::LpBuild(format!("x0 = {x0} is not a grid state")));
    }
    Ok(())
}

/// Full discretized program: maximize `∫f dμ₁` subject to
/// `∫g dμ_τ − ∫(A−r)g dμ₀ − ∫Bg dμ₁ = g(x₀)` for every test function, with
/// `μ_τ` mass ≤ 1 and `μ₀` mass ≤ 1/r.
pub fn build_full_lp(m: &ModelSpec, x0: f64, grid: &MeasureGrid, basis: &TestFunctionBasis) -> Result<LPInstance> {
    check_x0_on_grid(grid, x0)?;
    let vars = grid.full_vars();
    let nc = vars.len();
    let nb = basis.len();
    let nr = nb + 2;
    let mut a = vec![0.0; nr * nc];
    let mut rhs = vec![0.0; nr];
    let r = m.discount;
    for k in 0..nb {
        let row = &mut a[k * nc..(k + 1) * nc];
        for (j, v) in vars.iter().enumerate() {
            row[j] = match *v {
                Variable::Tau { x } => basis.eval(k, x)?[0],
                Variable::Occupation { x } => {
                    let [g, dg, ddg] = basis.eval(k, x)?;
                    -(0.5 * m.sigma2_at(x) * ddg + m.drift_at(x) * dg - r * g)
                }
                // −Bg: g′ at z = 0, the backward difference quotient otherwise
                Variable::Harvest { x, z } if z == 0.0 => basis.eval(k, x)?[1],
                Variable::Harvest { x, z } => basis.increment(k, x, z)? / z,
                Variable::Other { .. } => 0.0,
            };
        }
        rhs[k] = basis.eval(k, x0)?[0];
    }
    for (j, v) in vars.iter().enumerate() {
        match v {
            Variable::Tau { .. } => a[nb * nc + j] = 1.0,
            Variable::Occupation { .. } => a[(nb + 1) * nc + j] = 1.0,
            _ => {}
        }
    }
    rhs[nb] = 1.0;
    rhs[nb + 1] = 1.0 / r;
    let objective = vars
        .iter()
        .map(|v| match *v {
            Variable::Harvest { x, .. } => m.yield_at(x),
            _ => 0.0,
        })
        .collect();
    let mut senses = vec![Sense::Eq; nb];
    senses.extend([Sense::Le, Sense::Le]);
    let mut row_names: Vec<String> = (0..nb).map(|k| basis.name(k)).collect();
    row_names.extend(["mass_tau".to_string(), "mass_occupation".to_string()]);
    Ok(LPInstance { a, senses, rhs, objective, row_names, vars })
}

/// Auxiliary program: only μ₁ and the single ψ row `−∫Bψ dμ₁ = ψ(x₀)`.
pub fn build_aux_lp(m: &ModelSpec, fs: &FundamentalSolution, x0: f64, grid: &MeasureGrid) -> Result<LPInstance> {
    if !(x0 > 0.0) {
        return Err(HarvestError::Domain(format!("x0 = {x0} must be positive")));
    }
    let vars = grid.harvest_vars();
    let mut a = Vec::with_capacity(vars.len());
    let mut objective = Vec::with_capacity(vars.len());
    for v in &vars {
        let Variable::Harvest { x, z } = *v else { unreachable!() };
        a.push(if z == 0.0 { fs.dpsi_at(x)? } else { fs.psi_increment(x, z)? / z });
        objective.push(m.yield_at(x));
    }
    Ok(LPInstance {
        a,
        senses: vec![Sense::Eq],
        rhs: vec![fs.psi_at(x0)?],
        objective,
        row_names: vec!["psi".to_string()],
        vars,
    })
}

/// Atom of an LP solution with its meaning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportAtom {
    pub variable: Variable,
    pub weight: f64,
}

pub fn support_atoms(lp: &LPInstance, sol: &LPSolution, tol: f64) -> Vec<SupportAtom> {
    sol.support(tol).into_iter().map(|(j, weight)| SupportAtom { variable: lp.vars[j], weight }).collect()
}

/// Discretization sizes for [`run_lp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpParams {
    pub n_states: usize,
    pub n_splines: usize,
    pub jump_levels: usize,
    /// Add ψ to the spline test functions of the full program.
    pub psi_test_function: bool,
}

impl Default for LpParams {
    fn default() -> Self {
        Self { n_states: 120, n_splines: 40, jump_levels: 16, psi_test_function: true }
    }
}

impl LpParams {
    /// Twice the states and splines.
    pub fn refined(&self) -> Self {
        Self { n_states: 2 * self.n_states, n_splines: 2 * self.n_splines, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpMode {
    Full,
    Aux,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpReport {
    pub mode: LpMode,
    pub x0: f64,
    pub bstar: f64,
    pub x_max: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub status: LpStatus,
    pub value: f64,
    pub closed_form_value: f64,
    /// `value − V(x₀)`.
    pub gap: f64,
    pub iterations: usize,
    pub max_violation: f64,
    pub support: Vec<SupportAtom>,
    pub rows: Vec<RowActivity>,
}

/// Builds and solves one program at `x₀` on a grid through `x₀` and b*.
pub fn run_lp(
    m: &ModelSpec,
    fs: &FundamentalSolution,
    th: &Threshold,
    x0: f64,
    mode: LpMode,
    p: &LpParams,
) -> Result<LpReport> {
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(HarvestError::Domain(format!("x0 = {x0} must be positive")));
    }
    let x_max = MeasureGrid::lp_x_max(m, fs, x0, th.bstar)?;
    let grid = MeasureGrid::new(x_max, p.n_states, p.jump_levels, &[x0, th.bstar])?;
    let lp = match mode {
        LpMode::Full => {
            let basis = TestFunctionBasis::uniform(p.n_splines, x_max)?;
            let basis = if p.psi_test_function { basis.with_psi(fs.clone()) } else { basis };
            build_full_lp(m, x0, &grid, &basis)?
        }
        LpMode::Aux => build_aux_lp(m, fs, x0, &grid)?,
    };
    let sol = solve_lp(&lp)?;
    let v = value_at(m, fs, th, x0)?.total;
    let value = if sol.status == LpStatus::Optimal { sol.objective } else { f64::NAN };
    Ok(LpReport {
        mode,
        x0,
        bstar: th.bstar,
        x_max,
        n_rows: lp.n_rows(),
        n_cols: lp.n_cols(),
        status: sol.status,
        value,
        closed_form_value: v,
        gap: value - v,
        iterations: sol.iterations,
        max_violation: sol.max_violation,
        support: support_atoms(&lp, &sol, 1e-12 * (1.0 + value.abs())),
        rows: sol.rows,
    })
}
