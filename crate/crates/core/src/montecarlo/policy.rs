//! Harvesting policies. Each one is a time-0 action followed by reflection at
//! its barrier; policies are looked up by name in a [`PolicyRegistry`].

use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{HarvestError, Result};
use crate::model::ModelSpec;

/// What a policy does at time 0 from `x₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialHarvest {
    /// Revenue collected at time 0.
    pub lump: f64,
    /// State after the time-0 action.
    pub start: f64,
}

pub trait HarvestPolicy: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn barrier(&self) -> f64;
    fn initial_harvest(&self, m: &ModelSpec, x0: f64) -> InitialHarvest;
    fn spec(&self) -> PolicySpec;
}

/// Serializable description of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    ReflectAt { b: f64 },
    JumpThenReflect { b: f64 },
    Chatter { b: f64, n: u32 },
    RelaxedSweep { b: f64 },
}

impl PolicySpec {
    pub fn registry_name(&self) -> &'static str {
        match self {
            PolicySpec::ReflectAt { .. } => "reflect",
            PolicySpec::JumpThenReflect { .. } => "jump",
            PolicySpec::Chatter { .. } => "chatter",
            PolicySpec::RelaxedSweep { .. } => "sweep",
        }
    }

    pub fn args(&self) -> PolicyArgs {
        match *self {
            PolicySpec::Chatter { b, n } => PolicyArgs { b, n: Some(n) },
            PolicySpec::ReflectAt { b } | PolicySpec::JumpThenReflect { b } | PolicySpec::RelaxedSweep { b } => {
                PolicyArgs { b, n: None }
            }
        }
    }

    pub fn build(&self) -> Result<Box<dyn HarvestPolicy>> {
        PolicyRegistry::default().create(self.registry_name(), &self.args())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyArgs {
    pub b: f64,
    pub n: Option<u32>,
}

fn check_barrier(b: f64) -> Result<()> {
    if b >= 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(HarvestError::Config(format!("barrier b = {b} must be finite and ≥ 0")))
    }
}

/// Reflect at `b`; from `x₀ > b` the Skorohod map pushes down instantly,
/// which is a jump paid at the pre-jump price.
#[derive(Debug, Clone, Copy)]
pub struct ReflectAt {
    pub b: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct JumpThenReflect {
    pub b: f64,
}

/// Walk from `x₀` to `b` in `n` equal jumps, each priced at its pre-jump state.
#[derive(Debug, Clone, Copy)]
pub struct Chatter {
    pub b: f64,
    pub n: u32,
}

/// Sweep `[b, x₀]` at time 0 collecting `∫_b^{x₀} f`.
#[derive(Debug, Clone, Copy)]
pub struct RelaxedSweep {
    pub b: f64,
}

fn jump_lump(m: &ModelSpec, b: f64, x0: f64) -> InitialHarvest {
    if x0 > b {
        InitialHarvest { lump: m.yield_at(x0) * (x0 - b), start: b }
    } else {
        InitialHarvest { lump: 0.0, start: x0 }
    }
}

impl HarvestPolicy for ReflectAt {
    fn name(&self) -> &'static str {
        "reflect"
    }
    fn barrier(&self) -> f64 {
        self.b
    }
    fn initial_harvest(&self, m: &ModelSpec, x0: f64) -> InitialHarvest {
        jump_lump(m, self.b, x0)
    }
    fn spec(&self) -> PolicySpec {
        PolicySpec::ReflectAt { b: self.b }
    }
}

impl HarvestPolicy for JumpThenReflect {
    fn name(&self) -> &'static str {
        "jump"
    }
    fn barrier(&self) -> f64 {
        self.b
    }
    fn initial_harvest(&self, m: &ModelSpec, x0: f64) -> InitialHarvest {
        jump_lump(m, self.b, x0)
    }
    fn spec(&self) -> PolicySpec {
        PolicySpec::JumpThenReflect { b: self.b }
    }
}

impl Chatter {
    /// `Σ_k f(x_k)(x_k − x_{k+1})` over `x_k = x₀ − k(x₀ − b)/n`.
    pub fn lump(&self, m: &ModelSpec, x0: f64) -> f64 {
        if x0 <= self.b {
            return 0.0;
        }
        let n = self.n as f64;
        let step = (x0 - self.b) / n;
        (0..self.n).map(|k| m.yield_at(x0 - k as f64 * step) * step).sum()
    }
}

impl HarvestPolicy for Chatter {
    fn name(&self) -> &'static str {
        "chatter"
    }
    fn barrier(&self) -> f64 {
        self.b
    }
    fn initial_harvest(&self, m: &ModelSpec, x0: f64) -> InitialHarvest {
        InitialHarvest { lump: self.lump(m, x0), start: x0.min(self.b) }
    }
    fn spec(&self) -> PolicySpec {
        PolicySpec::Chatter { b: self.b, n: self.n }
    }
}

impl HarvestPolicy for RelaxedSweep {
    fn name(&self) -> &'static str {
        "sweep"
    }
    fn barrier(&self) -> f64 {
        self.b
    }
    fn initial_harvest(&self, m: &ModelSpec, x0: f64) -> InitialHarvest {
        if x0 > self.b {
            InitialHarvest { lump: m.yield_fn.integral(self.b, x0), start: self.b }
        } else {
            InitialHarvest { lump: 0.0, start: x0 }
        }
    }
    fn spec(&self) -> PolicySpec {
        PolicySpec::RelaxedSweep { b: self.b }
    }
}

pub type PolicyFactory = fn(&PolicyArgs) -> Result<Box<dyn HarvestPolicy>>;

/// Name → constructor table for harvesting policies.
#[derive(Clone)]
pub struct PolicyRegistry {
    factories: BTreeMap<&'static str, PolicyFactory>,
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &'static str, factory: PolicyFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, args: &PolicyArgs) -> Result<Box<dyn HarvestPolicy>> {
        let f = self
            .factories
            .get(name)
            .ok_or_else(|| HarvestError::Config(format!("unknown policy '{name}' (known: {:?})", self.names())))?;
        f(args)
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("reflect", |a| {
            check_barrier(a.b)?;
            Ok(Box::new(ReflectAt { b: a.b }))
        });
        r.register("jump", |a| {
            check_barrier(a.b)?;
            Ok(Box::new(JumpThenReflect { b: a.b }))
        });
        r.register("chatter", |a| {
            check_barrier(a.b)?;
            match a.n {
                Some(n) if n >= 1 => Ok(Box::new(Chatter { b: a.b, n })),
                _ => Err(HarvestError::Config("chatter needs n ≥ 1".into())),
            }
        });
        r.register("sweep", |a| {
            check_barrier(a.b)?;
            Ok(Box::new(RelaxedSweep { b: a.b }))
        });
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, YieldFn};

    fn exp_model() -> ModelSpec {
        ModelSpec::new(
            Family::DriftedBm { mu: 1.0, sigma: 2f64.sqrt() },
            1.0,
            YieldFn::Exponential { p: 1.0, alpha: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn registry_round_trip() {
        let reg = PolicyRegistry::default();
        assert_eq!(reg.names(), vec!["chatter", "jump", "reflect", "sweep"]);
        for spec in [
            PolicySpec::ReflectAt { b: 0.5 },
            PolicySpec::JumpThenReflect { b: 0.5 },
            PolicySpec::Chatter { b: 0.5, n: 4 },
            PolicySpec::RelaxedSweep { b: 0.5 },
        ] {
            let p = spec.build().unwrap();
            assert_eq!(p.spec(), spec);
            assert_eq!(p.name(), spec.registry_name());
        }
        assert!(reg.create("bogus", &PolicyArgs { b: 1.0, n: None }).is_err());
        assert!(PolicySpec::Chatter { b: 1.0, n: 0 }.build().is_err());
        assert!(PolicySpec::ReflectAt { b: -1.0 }.build().is_err());
    }

    #[test]
    fn chatter_lumps_are_lower_riemann_sums() {
        let m = exp_model();
        let c1 = Chatter { b: 0.0, n: 1 };
        assert!((c1.lump(&m, 1.0) - (-1f64).exp()).abs() < 1e-15);
        let fine = Chatter { b: 0.0, n: 1 << 16 }.lump(&m, 1.0);
        assert!((fine - (1.0 - (-1f64).exp())).abs() < 1e-5);
        let mut prev = 0.0;
        for k in 0..8 {
            let l = Chatter { b: 0.0, n: 1 << k }.lump(&m, 1.0);
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn chatter_one_equals_jump() {
        let m = exp_model();
        let a = Chatter { b: 0.3, n: 1 }.initial_harvest(&m, 1.7);
        let b = JumpThenReflect { b: 0.3 }.initial_harvest(&m, 1.7);
        assert_eq!(a, b);
    }

    #[test]
    fn policy_spec_json() {
        let s = serde_json::to_string(&PolicySpec::Chatter { b: 1.0, n: 8 }).unwrap();
        assert_eq!(s, r#"{"kind":"chatter","b":1.0,"n":8}"#);
    }
}
