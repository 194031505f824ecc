//! Test functions for the occupation-measure constraints: uniform cubic
//! B-splines, optionally joined by ψ itself.

use crate::error::{HarvestError, Result};
use crate::psi::FundamentalSolution;

/// Cardinal cubic B-spline on `[0, 4)` and its first two derivatives in `u`.
fn cardinal(u: f64) -> [f64; 3] {
    if !(0.0..4.0).contains(&u) {
        return [0.0; 3];
    }
    let v = (u - 2.0).abs();
    let sgn = if u < 2.0 { -1.0 } else { 1.0 };
    if v < 1.0 {
        [2.0 / 3.0 - v * v + 0.5 * v * v * v, sgn * (-2.0 * v + 1.5 * v * v), -2.0 + 3.0 * v]
    } else {
        let q = 2.0 - v;
        [q * q * q / 6.0, -sgn * 0.5 * q * q, q]
    }
}

#[derive(Debug, Clone)]
pub struct TestFunctionBasis {
    n_splines: usize,
    h: f64,
    /// leftmost knot; three spacings below 0 so the splines sum to 1 on `[0, x_max]`
    t0: f64,
    psi: Option<FundamentalSolution>,
}

impl TestFunctionBasis {
    /// `n_splines ≥ 4` uniform cubic B-splines whose sum is 1 on `[0, x_max]`.
    pub fn uniform(n_splines: usize, x_max: f64) -> Result<Self> {
        if n_splines < 4 {
            return Err(HarvestError::LpBuild(format!("need at least 4 splines, got {n_splines}")));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(HarvestError::LpBuild(format!("x_max = {x_max} must be positive")));
        }
        let h = x_max / (n_splines - 3) as f64;
        Ok(Self { n_splines, h, t0: -3.0 * h, psi: None })
    }

    /// Add ψ (cut off smoothly beyond the grid) as one more test function.
    pub fn with_psi(mut self, fs: FundamentalSolution) -> Self {
        self.psi = Some(fs);
        self
    }

    pub fn len(&self) -> usize {
        self.n_splines + usize::from(self.psi.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_splines(&self) -> usize {
        self.n_splines
    }

    pub fn has_psi(&self) -> bool {
        self.psi.is_some()
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..self.n_splines + 4).map(|j| self.t0 + j as f64 * self.h).collect()
    }

    /// Support `[lo, hi]` of element `k`.
    pub fn support(&self, k: usize) -> (f64, f64) {
        if k < self.n_splines {
            let lo = self.t0 + k as f64 * self.h;
            (lo, lo + 4.0 * self.h)
        } else {
            (0.0, f64::INFINITY)
        }
    }

    pub fn name(&self, k: usize) -> String {
        if k < self.n_splines { format!("spline[{k}]") } else { "psi".to_string() }
    }

    /// `(g, g′, g″)` of element `k` at `x ≥ 0`.
    pub fn eval(&self, k: usize, x: f64) -> Result<[f64; 3]> {
        if k < self.n_splines {
            let u = (x - self.t0) / self.h - k as f64;
            let [b, db, ddb] = cardinal(u);
            return Ok([b, db / self.h, ddb / (self.h * self.h)]);
        }
        match (&self.psi, k == self.n_splines) {
            (Some(fs), true) => {
                // ψ″ from the ODE so that (A − r)ψ vanishes to rounding
                let [p, d, dd] = fs.eval_at(x)?;
                let m = fs.model();
                let s2 = m.sigma2_at(x);
                Ok(if s2 > 0.0 { [p, d, 2.0 * (m.discount * p - m.drift_at(x) * d) / s2] } else { [p, d, dd] })
            }
            _ => Err(HarvestError::LpBuild(format!("basis index {k} out of range"))),
        }
    }

    /// `g(x) − g(x − z)`.
    pub fn increment(&self, k: usize, x: f64, z: f64) -> Result<f64> {
        if k == self.n_splines {
            if let Some(fs) = &self.psi {
                return fs.psi_increment(x, z);
            }
        }
        Ok(self.eval(k, x)?[0] - self.eval(k, x - z)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        let b = TestFunctionBasis::uniform(40, 10.0).unwrap();
        for i in 0..=1000 {
            let x = 10.0 * i as f64 / 1000.0;
            let mut s = [0.0; 3];
            for k in 0..b.len() {
                let v = b.eval(k, x).unwrap();
                for c in 0..3 {
                    s[c] += v[c];
                }
            }
            assert!((s[0] - 1.0).abs() < 1e-13, "{x}: {}", s[0]);
            assert!(s[1].abs() < 1e-10 && s[2].abs() < 1e-8);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let b = TestFunctionBasis::uniform(12, 9.0).unwrap();
        let e = 1e-6;
        for k in 0..12 {
            for &x in &[0.1, 1.3, 2.2, 4.7, 8.9] {
                let [_, d, dd] = b.eval(k, x).unwrap();
                let fd = (b.eval(k, x + e).unwrap()[0] - b.eval(k, x - e).unwrap()[0]) / (2.0 * e);
                let fdd = (b.eval(k, x + e).unwrap()[1] - b.eval(k, x - e).unwrap()[1]) / (2.0 * e);
                assert!((d - fd).abs() < 1e-7 && (dd - fdd).abs() < 1e-6, "{k} {x}: {d} {fd} {dd} {fdd}");
            }
        }
    }

    #[test]
    fn compact_support() {
        let b = TestFunctionBasis::uniform(10, 7.0).unwrap();
        for k in 0..10 {
            let (lo, hi) = b.support(k);
            assert_eq!(b.eval(k, hi + 1e-9).unwrap(), [0.0; 3]);
            if lo > 0.0 {
                assert_eq!(b.eval(k, lo - 1e-9).unwrap(), [0.0; 3]);
            }
        }
        assert!(b.eval(10, 1.0).is_err());
        assert!(TestFunctionBasis::uniform(3, 1.0).is_err());
    }
}
