//! Reflected-SDE simulation of harvested paths and discounted payoff
//! estimation.
//!
//! Paths are independent ChaCha8 streams keyed by `(seed, path index)`, so an
//! estimate does not depend on the thread schedule.

pub mod policy;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarvestError, Result};
use crate::model::ModelSpec;
use crate::threshold::Threshold;

pub use policy::{
    Chatter, HarvestPolicy, InitialHarvest, JumpThenReflect, PolicyArgs, PolicyRegistry, PolicySpec, ReflectAt,
    RelaxedSweep,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Truncation horizon T.
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Reflect the discrete chain at `b − ζσ(b)√dt` instead of `b`, which
    /// removes the leading `O(√dt)` bias of the projection scheme.
    #[serde(default)]
    pub barrier_correction: bool,
}

/// `−ζ(1/2)/√(2π)`: the mean overshoot of a Gaussian random walk in units of
/// its step deviation, as in the Broadie–Glasserman–Kou barrier shift.
pub const OVERSHOOT_CONST: f64 = 0.582_597_157_939_010_7;

impl SimConfig {
    /// Plain projection scheme (no barrier correction).
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self { dt, horizon, n_paths, seed, barrier_correction: false }
    }

    /// `dt = 1e−3/r` and `T` with `e^{−rT} = 1e−4`.
    pub fn for_model(m: &ModelSpec, n_paths: usize, seed: u64) -> Self {
        let r = m.discount;
        Self::new(1e-3 / r, 1e4f64.ln() / r, n_paths, seed)
    }

    pub fn validate(&self, m: &ModelSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(HarvestError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(HarvestError::Config(format!("horizon {} must be finite and ≥ dt", self.horizon)));
        }
        if self.dt > 1e-2 / m.discount * (1.0 + 1e-12) {
            return Err(HarvestError::Config(format!("dt = {} exceeds 1e-2/r", self.dt)));
        }
        if self.n_paths < 2 {
            return Err(HarvestError::Config("need at least two paths for a standard error".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).ceil() as usize
    }

    /// Barrier the discrete chain actually reflects at.
    pub fn effective_barrier(&self, m: &ModelSpec, barrier: f64) -> f64 {
        if self.barrier_correction && barrier > 0.0 {
            (barrier - OVERSHOOT_CONST * m.sigma_at(barrier) * self.dt.sqrt()).max(0.0)
        } else {
            barrier
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub policy: PolicySpec,
    pub x0: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub extinct_fraction: f64,
    pub lump_term: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub index: usize,
    /// Lump plus discounted reflection income.
    pub payoff: f64,
    /// `Σ e^{−r t_{k+1}} dL_k`.
    pub discounted_local_time: f64,
    /// Absorbed at 0 before the horizon.
    pub extinct: bool,
    pub extinction_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub t: f64,
    pub x: f64,
    pub dl: f64,
}

/// One projected Euler step: propose `x + b dt + σ dW`; anything above the
/// barrier is pushed back to it and returned as local time.
pub fn reflect_step(x: f64, barrier: f64, dw: f64, m: &ModelSpec, dt: f64) -> (f64, f64) {
    let proposal = x + m.drift_at(x) * dt + m.sigma_at(x) * dw;
    if proposal > barrier {
        (barrier, proposal - barrier)
    } else {
        (proposal, 0.0)
    }
}

/// `ln P(bridge from x to y hits 0)` over a step with frozen `σ`.
fn log_bridge_hit(x: f64, y: f64, sigma: f64, dt: f64) -> f64 {
    if sigma == 0.0 {
        return f64::NEG_INFINITY;
    }
    -2.0 * x * y / (sigma * sigma * dt)
}

/// Simulate the dynamic part of one path from `start` under reflection at
/// `barrier`, returning the discounted local time and the extinction time.
///
/// Besides `X ≤ 0` at a grid time, a step is also killed with the Brownian
/// bridge probability of having touched 0 in between.
fn run_path(
    m: &ModelSpec,
    barrier: f64,
    start: f64,
    cfg: &SimConfig,
    index: usize,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> (f64, Option<f64>) {
    let barrier = cfg.effective_barrier(m, barrier);
    if start <= 0.0 || barrier <= 0.0 {
        return (0.0, Some(0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let sqdt = cfg.dt.sqrt();
    let r = m.discount;
    let mut x = start;
    let mut acc = 0.0;
    let step_discount = (-r * cfg.dt).exp();
    let mut disc = 1.0;
    if let Some(t) = trace.as_deref_mut() {
        t.push(TraceStep { t: 0.0, x, dl: 0.0 });
    }
    for k in 0..cfg.n_steps() {
        let t_next = (k + 1) as f64 * cfg.dt;
        disc *= step_discount;
        let xi: f64 = StandardNormal.sample(&mut rng);
        let (xn, dl) = reflect_step(x, barrier, sqdt * xi, m, cfg.dt);
        if xn <= 0.0 {
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceStep { t: t_next, x: 0.0, dl: 0.0 });
            }
            return (acc, Some(t_next));
        }
        let lp = log_bridge_hit(x, xn, m.sigma_at(x), cfg.dt);
        if lp > -40.0 {
            let u: f64 = rand::Rng::random(&mut rng);
            if u.ln() < lp {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceStep { t: t_next, x: 0.0, dl: 0.0 });
                }
                return (acc, Some(t_next));
            }
        }
        if dl > 0.0 {
            acc += disc * dl;
        }
        x = xn;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceStep { t: t_next, x, dl });
        }
    }
    (acc, None)
}

/// Bound on the reflection income forgone by stopping at T:
/// `e^{−rT} f(b) (β⁺/r + s/√(2r))`, with β⁺ and s the largest drift and
/// volatility on `[0, b]`.
pub fn tail_bound(m: &ModelSpec, barrier: f64, horizon: f64) -> f64 {
    let r = m.discount;
    let (mut beta, mut s) = (0.0f64, 0.0f64);
    for i in 0..=64 {
        let x = barrier * i as f64 / 64.0;
        beta = beta.max(m.drift_at(x));
        s = s.max(m.sigma_at(x));
    }
    (-r * horizon).exp() * m.yield_at(barrier) * (beta / r + s / (2.0 * r).sqrt())
}

/// Per-path outcomes in path-index order.
pub fn simulate_paths(
    m: &ModelSpec,
    policy: &dyn HarvestPolicy,
    x0: f64,
    cfg: &SimConfig,
) -> Result<Vec<PathOutcome>> {
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(HarvestError::Domain(format!("x0 = {x0} must be positive")));
    }
    cfg.validate(m)?;
    let b = policy.barrier();
    let init = policy.initial_harvest(m, x0);
    let fb = m.yield_at(b);
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let (acc, ext) = run_path(m, b, init.start, cfg, i, None);
            PathOutcome {
                index: i,
                payoff: init.lump + fb * acc,
                discounted_local_time: acc,
                extinct: ext.is_some(),
                extinction_time: ext,
            }
        })
        .collect())
}

pub fn simulate_payoff(m: &ModelSpec, policy: &dyn HarvestPolicy, x0: f64, cfg: &SimConfig) -> Result<SimResult> {
    let outs = simulate_paths(m, policy, x0, cfg)?;
    let n = outs.len() as f64;
    // ordered sums keep the estimate schedule independent
    let mean = outs.iter().map(|o| o.payoff).sum::<f64>() / n;
    let var = outs.iter().map(|o| (o.payoff - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let extinct = outs.iter().filter(|o| o.extinct).count() as f64;
    Ok(SimResult {
        policy: policy.spec(),
        x0,
        mean,
        stderr: (var / n).sqrt(),
        n_paths: outs.len(),
        extinct_fraction: extinct / n,
        lump_term: policy.initial_harvest(m, x0).lump,
        tail_bound: tail_bound(m, policy.barrier(), cfg.horizon),
    })
}

/// Full state trace of one path under reflection at `barrier`.
pub fn trace_path(m: &ModelSpec, barrier: f64, start: f64, cfg: &SimConfig, index: usize) -> Vec<TraceStep> {
    let mut out = Vec::with_capacity(cfg.n_steps() + 1);
    run_path(m, barrier, start, cfg, index, Some(&mut out));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatterRow {
    pub n: u32,
    pub lump: f64,
    pub payoff: f64,
    pub stderr: f64,
}

/// Payoff of `Chatter(b*, n)` for each `n`. The reflection part is simulated
/// once from b* and shared, so differences between rows are exact.
pub fn chatter_convergence(
    m: &ModelSpec,
    th: &Threshold,
    x0: f64,
    cfg: &SimConfig,
    n_list: &[u32],
) -> Result<Vec<ChatterRow>> {
    if !(x0 > th.bstar) {
        return Err(HarvestError::Domain(format!("x0 = {x0} must exceed b* = {}", th.bstar)));
    }
    let dynamic = if th.bstar > 0.0 {
        simulate_payoff(m, &ReflectAt { b: th.bstar }, th.bstar, cfg)?
    } else {
        // reflection at 0 is immediate extinction
        cfg.validate(m)?;
        SimResult {
            policy: PolicySpec::ReflectAt { b: 0.0 },
            x0: 0.0,
            mean: 0.0,
            stderr: 0.0,
            n_paths: cfg.n_paths,
            extinct_fraction: 1.0,
            lump_term: 0.0,
            tail_bound: 0.0,
        }
    };
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(HarvestError::Config("chatter needs n ≥ 1".into()));
            }
            let lump = Chatter { b: th.bstar, n }.lump(m, x0);
            Ok(ChatterRow { n, lump, payoff: lump + dynamic.mean, stderr: dynamic.stderr })
        })
        .collect()
}
