//! Dense two-phase primal simplex.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots it falls back
//! to Bland's rule until the objective moves again, which rules out cycling.
//! The tableau is rebuilt from the original columns with an LU factorization
//! of the basis every few dozen pivots and once more at the end, and the
//! returned primal is re-checked against every original row.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{LPInstance, Sense};
use crate::error::{HarvestError, Result};

const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const PIVOT_REL: f64 = 1e-7;
const HARRIS_TOL: f64 = 1e-11;
/// Largest row violation a returned optimum may carry, measured on rows
/// divided by `max(1, max_j |a_ij|)`.
pub const FEAS_TOL: f64 = 1e-8;
const STRICT_PIVOT_TOL: f64 = 1e-8;
const STRICT_PIVOT_REL: f64 = 1e-4;
const REFACTOR_EVERY: usize = 50;
const ARTIFICIAL_DRIVE_TOL: f64 = 1e-7;
const STRICT_REFACTOR_EVERY: usize = 10;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowActivity {
    pub name: String,
    pub sense: Sense,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs` for `≤` rows, `lhs − rhs` for `≥`, the residual for `=`.
    pub slack: f64,
    pub active: bool,
    pub dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LPSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub rows: Vec<RowActivity>,
    pub iterations: usize,
    /// Ray for `Unbounded`, phase-one row multipliers for `Infeasible`.
    pub certificate: Option<Vec<f64>>,
    pub max_violation: f64,
}

impl LPSolution {
    /// Variables with weight above `tol`, as `(column, weight)`.
    pub fn support(&self, tol: f64) -> Vec<(usize, f64)> {
        self.x.iter().enumerate().filter(|(_, &v)| v > tol).map(|(j, &v)| (j, v)).collect()
    }
}

struct Tableau {
    m: usize,
    /// structural + slack + artificial columns
    n: usize,
    n_struct: usize,
    /// original standard-form matrix with rhs in the last column, row-major
    a0: Vec<f64>,
    t: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
    /// basis at the last successful factorization
    checkpoint: Vec<usize>,
    /// pivot tolerances are tightened after a singular refactorization
    strict: bool,
}

impl Tableau {
    fn w(&self) -> usize {
        self.n + 1
    }

    fn basis_lu(&self) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let w = self.w();
        let bm = DMatrix::from_fn(self.m, self.m, |i, k| self.a0[i * w + self.basis[k]]);
        let lu = bm.lu();
        if !lu.is_invertible() {
            return Err(HarvestError::Solver("singular basis during refactorization".into()));
        }
        Ok(lu)
    }

    /// `T = B⁻¹[A | b]` and reduced costs from scratch. A singular basis
    /// (a pivot taken on cancellation noise) is replaced by the last good one
    /// once, after which pivoting is stricter.
    fn refactor(&mut self) -> Result<()> {
        let lu = match self.basis_lu() {
            Ok(lu) => lu,
            Err(e) if !self.strict => {
                self.strict = true;
                self.basis.clone_from(&self.checkpoint);
                self.basis_lu().map_err(|_| e)?
            }
            Err(e) => return Err(e),
        };
        self.checkpoint.clone_from(&self.basis);
        let (m, w) = (self.m, self.w());
        let a = DMatrix::from_row_slice(m, w, &self.a0);
        let sol = lu.solve(&a).ok_or_else(|| HarvestError::Solver("basis solve failed".into()))?;
        for i in 0..m {
            for j in 0..w {
                self.t[i * w + j] = sol[(i, j)];
            }
        }
        // basic columns are unit vectors by definition
        for (i, &bj) in self.basis.iter().enumerate() {
            for k in 0..m {
                self.t[k * w + bj] = if k == i { 1.0 } else { 0.0 };
            }
        }
        self.reprice();
        Ok(())
    }

    fn reprice(&mut self) {
        let (m, w) = (self.m, self.w());
        for j in 0..w {
            let mut z = 0.0;
            for i in 0..m {
                z += self.cost[self.basis[i]] * self.t[i * w + j];
            }
            self.d[j] = if j < self.n { self.cost[j] - z } else { -z };
        }
        for &bj in &self.basis {
            self.d[bj] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.w();
        let p = self.t[r * w + c];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        self.t[r * w + c] = 1.0;
        let prow: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                let row = &mut self.t[i * w..(i + 1) * w];
                for j in 0..w {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        }
        let f = self.d[c];
        for j in 0..w {
            self.d[j] -= f * prow[j];
        }
        self.d[c] = 0.0;
        self.basis[r] = c;
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in 0..self.n {
            if self.blocked[j] || self.d[j] <= PRICE_TOL {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.map_or(true, |b| self.d[j] > self.d[b]) {
                best = Some(j);
            }
        }
        best
    }

    /// Harris two-pass ratio test: relax the bound by a feasibility tolerance,
    /// then pick among the rows that still qualify. Dantzig mode takes the
    /// largest pivot; Bland mode the lowest basic index among pivots that are
    /// not small relative to the column.
    fn leaving(&self, c: usize, bland: bool) -> Option<usize> {
        let w = self.w();
        let (abs_tol, rel_tol) = if self.strict { (STRICT_PIVOT_TOL, STRICT_PIVOT_REL) } else { (PIVOT_TOL, PIVOT_REL) };
        let colmax = (0..self.m).fold(0.0f64, |a, i| a.max(self.t[i * w + c].abs()));
        let big = abs_tol.max(rel_tol * colmax);
        let mut theta = f64::INFINITY;
        for i in 0..self.m {
            let a = self.t[i * w + c];
            if a > abs_tol {
                theta = theta.min((self.t[i * w + self.n].max(0.0) + HARRIS_TOL) / a);
            }
        }
        if !theta.is_finite() {
            return None;
        }
        let candidates =
            (0..self.m).filter(|&i| {
                let a = self.t[i * w + c];
                a > abs_tol && self.t[i * w + self.n].max(0.0) / a <= theta
            });
        let largest = candidates.clone().max_by(|&i, &k| self.t[i * w + c].total_cmp(&self.t[k * w + c]))?;
        if !bland || self.t[largest * w + c] < big {
            return Some(largest);
        }
        candidates.filter(|&i| self.t[i * w + c] >= big).min_by_key(|&i| self.basis[i])
    }

    /// Iterate to optimality of the current cost; `Ok(Some(col))` reports an
    /// unbounded entering column.
    fn run(&mut self, iters: &mut usize, max_iter: usize) -> Result<Option<usize>> {
        let w = self.w();
        let mut degenerate = 0usize;
        let mut since_refactor = 0usize;
        let mut refactors_at_optimum = 0;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some(c) = self.entering(bland) else {
                // confirm optimality on a fresh factorization
                if since_refactor == 0 || refactors_at_optimum >= 3 {
                    return Ok(None);
                }
                self.refactor()?;
                since_refactor = 0;
                refactors_at_optimum += 1;
                continue;
            };
            let Some(r) = self.leaving(c, bland) else {
                return Ok(Some(c));
            };
            let step = self.t[r * w + self.n].max(0.0) / self.t[r * w + c] * self.d[c];
            if step <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
            *iters += 1;
            since_refactor += 1;
            if *iters > max_iter {
                return Err(HarvestError::Solver(format!(
                    "iteration guard {max_iter} exceeded: last pivot row {r} col {c}, objective {}, degenerate run {degenerate}",
                    -self.d[self.n]
                )));
            }
            if since_refactor >= if self.strict { STRICT_REFACTOR_EVERY } else { REFACTOR_EVERY } {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }

    /// Dual simplex pivots on a fresh factorization until no basic variable
    /// is below `-FEAS_TOL/10`; returns the number of pivots made.
    fn dual_cleanup(&mut self, iters: &mut usize) -> Result<usize> {
        let w = self.w();
        let mut count = 0;
        for _ in 0..(4 * self.m + 20) {
            self.refactor()?;
            let mut r = None;
            let mut most = -0.1 * FEAS_TOL;
            for i in 0..self.m {
                let v = self.t[i * w + self.n];
                if v < most {
                    most = v;
                    r = Some(i);
                }
            }
            let Some(r) = r else { break };
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                let a = self.t[r * w + j];
                if self.blocked[j] || self.basis.contains(&j) || a >= -PIVOT_TOL {
                    continue;
                }
                let ratio = self.d[j].min(0.0) / a;
                best = match best {
                    Some((k, rk)) if ratio > rk + 1e-12 || (ratio >= rk - 1e-12 && a.abs() <= self.t[r * w + k].abs()) => {
                        Some((k, rk))
                    }
                    _ => Some((j, ratio)),
                };
            }
            let Some((c, _)) = best else { break };
            self.pivot(r, c);
            *iters += 1;
            count += 1;
        }
        Ok(count)
    }

    fn solve_basic(&self) -> Result<Vec<f64>> {
        let w = self.w();
        let lu = self.basis_lu()?;
        let b = DVector::from_fn(self.m, |i, _| self.a0[i * w + self.n]);
        let mut xb = lu.solve(&b).ok_or_else(|| HarvestError::Solver("basis solve failed".into()))?;
        // one step of iterative refinement
        let bm = DMatrix::from_fn(self.m, self.m, |i, k| self.a0[i * w + self.basis[k]]);
        let res = &b - &bm * &xb;
        if let Some(dx) = lu.solve(&res) {
            xb += dx;
        }
        let mut x = vec![0.0; self.n];
        for (i, &bj) in self.basis.iter().enumerate() {
            x[bj] = xb[i];
        }
        Ok(x)
    }

    fn duals(&self) -> Result<Vec<f64>> {
        let cb = DVector::from_fn(self.m, |i, _| self.cost[self.basis[i]]);
        // Bᵀy = c_B
        let w = self.w();
        let bt = DMatrix::from_fn(self.m, self.m, |k, i| self.a0[i * w + self.basis[k]]);
        let y = bt.lu().solve(&cb).ok_or_else(|| HarvestError::Solver("dual solve failed".into()))?;
        Ok(y.iter().copied().collect())
    }
}

/// Maximize `cᵀx` subject to the rows of `lp` and `x ≥ 0`.
pub fn solve_lp(lp: &LPInstance) -> Result<LPSolution> {
    let (m, ns) = (lp.n_rows(), lp.n_cols());
    if lp.a.iter().chain(&lp.rhs).chain(&lp.objective).any(|v| !v.is_finite()) {
        return Err(HarvestError::LpBuild("non-finite coefficient".into()));
    }

    // row equilibration and sign normalization
    let mut scale = vec![1.0; m];
    let mut sense = lp.senses.clone();
    for i in 0..m {
        let row = &lp.a[i * ns..(i + 1) * ns];
        let mx = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut s = if mx > 0.0 { 1.0 / mx } else { 1.0 };
        if lp.rhs[i] < 0.0 {
            s = -s;
            sense[i] = match sense[i] {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        scale[i] = s;
    }
    let n_slack = sense.iter().filter(|s| **s != Sense::Eq).count();
    let n_art = sense.iter().filter(|s| **s != Sense::Le).count();
    let first_art = ns + n_slack;
    let n = first_art + n_art;
    let w = n + 1;
    let mut a0 = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let (mut ks, mut ka) = (ns, first_art);
    for i in 0..m {
        for j in 0..ns {
            a0[i * w + j] = lp.a[i * ns + j] * scale[i];
        }
        a0[i * w + n] = lp.rhs[i] * scale[i];
        match sense[i] {
            Sense::Le => {
                a0[i * w + ks] = 1.0;
                basis[i] = ks;
                ks += 1;
            }
            Sense::Ge => {
                a0[i * w + ks] = -1.0;
                ks += 1;
                a0[i * w + ka] = 1.0;
                basis[i] = ka;
                ka += 1;
            }
            Sense::Eq => {
                a0[i * w + ka] = 1.0;
                basis[i] = ka;
                ka += 1;
            }
        }
    }

    let mut tab = Tableau {
        m,
        n,
        n_struct: ns,
        t: a0.clone(),
        a0,
        d: vec![0.0; w],
        cost: (0..n).map(|j| if j >= first_art { -1.0 } else { 0.0 }).collect(),
        checkpoint: basis.clone(),
        basis,
        strict: false,
        blocked: vec![false; n],
    };
    tab.reprice();
    let max_iter = 50 * (m + n) + 1000;
    let mut iters = 0;

    // phase one
    if n_art > 0 {
        if tab.run(&mut iters, max_iter)?.is_some() {
            return Err(HarvestError::Solver("phase one reported unbounded".into()));
        }
        let x = tab.solve_basic()?;
        let infeas: f64 = x[first_art..].iter().sum();
        let bnorm = lp.rhs.iter().zip(&scale).fold(0.0f64, |a, (b, s)| a.max((b * s).abs()));
        if infeas > 1e-9 * (1.0 + bnorm) {
            let y = tab.duals()?;
            let cert: Vec<f64> = y.iter().zip(&scale).map(|(v, s)| v * s).collect();
            return Ok(LPSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                x: vec![0.0; ns],
                duals: vec![0.0; m],
                rows: Vec::new(),
                iterations: iters,
                certificate: Some(cert),
                max_violation: infeas,
            });
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..m {
            if tab.basis[i] < first_art {
                continue;
            }
            // largest entry; rows left with noise only are redundant
            let c = (0..first_art).max_by(|&a, &b| tab.t[i * w + a].abs().total_cmp(&tab.t[i * w + b].abs()));
            if let Some(c) = c.filter(|&c| tab.t[i * w + c].abs() > ARTIFICIAL_DRIVE_TOL) {
                tab.pivot(i, c);
            }
        }
        tab.refactor()?;
    }

    // phase two
    for j in first_art..n {
        tab.blocked[j] = true;
    }
    tab.cost = (0..n).map(|j| if j < ns { lp.objective[j] } else { 0.0 }).collect();
    tab.refactor()?;
    let mut unbounded = tab.run(&mut iters, max_iter)?;
    for _ in 0..3 {
        if unbounded.is_some() || tab.dual_cleanup(&mut iters)? == 0 {
            break;
        }
        unbounded = tab.run(&mut iters, max_iter)?;
    }
    if let Some(c) = unbounded {
        let mut ray = vec![0.0; ns];
        if c < ns {
            ray[c] = 1.0;
        }
        for i in 0..m {
            let bj = tab.basis[i];
            if bj < ns {
                ray[bj] = -tab.t[i * w + c];
            }
        }
        return Ok(LPSolution {
            status: LpStatus::Unbounded,
            objective: f64::INFINITY,
            x: vec![0.0; ns],
            duals: vec![0.0; m],
            rows: Vec::new(),
            iterations: iters,
            certificate: Some(ray),
            max_violation: 0.0,
        });
    }

    let full = tab.solve_basic()?;
    let mut x: Vec<f64> = full[..ns].to_vec();
    for v in x.iter_mut() {
        if *v < 0.0 && *v > -FEAS_TOL {
            *v = 0.0;
        }
    }
    let y = tab.duals()?;
    let duals: Vec<f64> = y.iter().zip(&scale).map(|(v, s)| v * s).collect();

    let mut worst = x.iter().fold(0.0f64, |a, v| a.max(-v));
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let lhs: f64 = lp.a[i * ns..(i + 1) * ns].iter().zip(&x).map(|(a, v)| a * v).sum();
        let rhs = lp.rhs[i];
        let (slack, viol) = match lp.senses[i] {
            Sense::Eq => (lhs - rhs, (lhs - rhs).abs()),
            Sense::Le => (rhs - lhs, (lhs - rhs).max(0.0)),
            Sense::Ge => (lhs - rhs, (rhs - lhs).max(0.0)),
        };
        let row_scale = lp.a[i * ns..(i + 1) * ns].iter().fold(1.0f64, |a, v| a.max(v.abs()));
        worst = worst.max(viol / row_scale);
        let active = lp.senses[i] == Sense::Eq || slack.abs() <= 1e-9 * (1.0 + rhs.abs());
        rows.push(RowActivity { name: lp.row_names[i].clone(), sense: lp.senses[i], lhs, rhs, slack, active, dual: duals[i] });
    }
    if worst > FEAS_TOL {
        return Err(HarvestError::Solver(format!("primal certification failed: worst row violation {worst:e}")));
    }
    debug_assert!(tab.n_struct == ns);
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LPSolution {
        status: LpStatus::Optimal,
        objective,
        x,
        duals,
        rows,
        iterations: iters,
        certificate: None,
        max_violation: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oclp::Variable;

    fn lp(a: Vec<Vec<f64>>, senses: Vec<Sense>, rhs: Vec<f64>, c: Vec<f64>) -> LPInstance {
        let n = c.len();
        LPInstance {
            a: a.into_iter().flatten().collect(),
            senses,
            row_names: (0..rhs.len()).map(|i| format!("r{i}")).collect(),
            rhs,
            objective: c,
            vars: (0..n).map(|j| Variable::Other { index: j }).collect(),
        }
    }

    #[test]
    fn textbook_equality() {
        let sol = solve_lp(&lp(vec![vec![1.0, 1.0]], vec![Sense::Eq], vec![1.0], vec![1.0, 0.0])).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-14);
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && sol.x[1] == 0.0);
    }

    #[test]
    fn classic_two_variable() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6)
        let sol = solve_lp(&lp(
            vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            vec![Sense::Le; 3],
            vec![4.0, 12.0, 18.0],
            vec![3.0, 5.0],
        ))
        .unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
        // duals (0, 3/2, 1)
        assert!((sol.duals[1] - 1.5).abs() < 1e-12 && (sol.duals[2] - 1.0).abs() < 1e-12);
        assert!(!sol.rows[0].active && sol.rows[1].active);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let inf = solve_lp(&lp(vec![vec![1.0], vec![1.0]], vec![Sense::Le, Sense::Ge], vec![1.0, 2.0], vec![1.0]))
            .unwrap();
        assert_eq!(inf.status, LpStatus::Infeasible);
        assert!(inf.certificate.is_some());
        let unb = solve_lp(&lp(vec![vec![1.0, -1.0]], vec![Sense::Le], vec![1.0], vec![0.0, 1.0])).unwrap();
        assert_eq!(unb.status, LpStatus::Unbounded);
        let ray = unb.certificate.unwrap();
        assert!(ray[1] > 0.0 && ray[0] - ray[1] <= 1e-12);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // −x − y = −2 twice, max x → 2
        let sol = solve_lp(&lp(
            vec![vec![-1.0, -1.0], vec![-1.0, -1.0]],
            vec![Sense::Eq, Sense::Eq],
            vec![-2.0, -2.0],
            vec![1.0, 0.0],
        ))
        .unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_objective() {
        let sol = solve_lp(&lp(vec![vec![1.0, 2.0]], vec![Sense::Eq], vec![3.0], vec![0.0, 0.0])).unwrap();
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under textbook Dantzig pricing
        let sol = solve_lp(&lp(
            vec![
                vec![0.25, -60.0, -0.04, 9.0],
                vec![0.5, -90.0, -0.02, 3.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![Sense::Le; 3],
            vec![0.0, 0.0, 1.0],
            vec![0.75, -150.0, 0.02, -6.0],
        ))
        .unwrap();
        assert!((sol.objective - 0.05).abs() < 1e-12);
    }
}
