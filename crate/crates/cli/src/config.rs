//! JSON run configuration.

use std::path::{Path, PathBuf};

use harvest_core::model::ModelSpec;
use harvest_core::montecarlo::SimConfig;
use harvest_core::oclp::LpParams;
use harvest_core::pipeline::{default_x_max, solve_with, Solved};
use harvest_core::psi::{GridParams, PsiSolverRegistry};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// An initial population, either absolute or as a multiple of b*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0 {
    Value(f64),
    Relative { times_bstar: f64 },
}

impl X0 {
    pub fn resolve(&self, bstar: f64) -> f64 {
        match *self {
            X0::Value(x) => x,
            X0::Relative { times_bstar } => times_bstar * bstar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiSection {
    /// Name in the ψ solver registry.
    #[serde(default = "default_solver")]
    pub solver: String,
    /// Right end of the ψ grid; `10·max(scale, x₀)` when absent.
    #[serde(default)]
    pub x_max: Option<f64>,
}

fn default_solver() -> String {
    "auto".into()
}

impl Default for PsiSection {
    fn default() -> Self {
        Self { solver: default_solver(), x_max: None }
    }
}

/// Simulation budget; `dt` and `horizon` default to `1e−3/r` and `ln(1e4)/r`.
/// `barrier_correction` shifts the discrete reflection barrier (see
/// [`SimConfig::barrier_correction`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub barrier_correction: bool,
}

impl SimSection {
    pub fn resolve(&self, m: &ModelSpec) -> SimConfig {
        let base = SimConfig::for_model(m, self.n_paths, self.seed);
        SimConfig {
            dt: self.dt.unwrap_or(base.dt),
            horizon: self.horizon.unwrap_or(base.horizon),
            barrier_correction: self.barrier_correction,
            ..base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, formats: all_formats() }
    }
}

fn default_chatter() -> Vec<u32> {
    vec![1, 2, 4, 8, 16, 32, 64]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub x0: Vec<X0>,
    #[serde(default)]
    pub psi: PsiSection,
    #[serde(default)]
    pub sim: Option<SimSection>,
    #[serde(default)]
    pub lp: LpParams,
    #[serde(default = "default_chatter")]
    pub chatter_n: Vec<u32>,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parse and validate; nothing is computed before this succeeds.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model.validate()?;
        for x in &self.x0 {
            let v = match *x {
                X0::Value(v) => v,
                X0::Relative { times_bstar } => times_bstar,
            };
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("x0 entries must be positive, got {v}")));
            }
        }
        if PsiSolverRegistry::default().get(&self.psi.solver).is_none() {
            return Err(CliError::Config(format!(
                "unknown psi solver {:?}; known: {:?}",
                self.psi.solver,
                PsiSolverRegistry::default().names()
            )));
        }
        if let Some(x) = self.psi.x_max {
            if !(x > 0.0) || !x.is_finite() {
                return Err(CliError::Config(format!("psi.x_max = {x} must be positive")));
            }
        }
        if let Some(sim) = &self.sim {
            sim.resolve(&self.model).validate(&self.model)?;
        }
        let lp = &self.lp;
        if lp.n_states < 2 || lp.n_splines < 4 || lp.jump_levels < 2 {
            return Err(CliError::Config(format!(
                "lp sizes too small: states {}, splines {}, jump levels {}",
                lp.n_states, lp.n_splines, lp.jump_levels
            )));
        }
        if self.chatter_n.contains(&0) {
            return Err(CliError::Config("chatter_n entries must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Largest absolute x₀ (relative entries are resolved after b* is known,
    /// so they count as the model scale here).
    fn x0_hint(&self) -> Vec<f64> {
        self.x0
            .iter()
            .map(|x| match *x {
                X0::Value(v) => v,
                X0::Relative { times_bstar } => times_bstar * self.model.scale(),
            })
            .collect()
    }

    /// Classify, solve for ψ with the configured solver, locate b*.
    pub fn solve(&self) -> CliResult<Solved> {
        let registry = PsiSolverRegistry::default();
        let solver = registry
            .get(&self.psi.solver)
            .ok_or_else(|| CliError::Config(format!("unknown psi solver {:?}", self.psi.solver)))?;
        let x_max = self.psi.x_max.unwrap_or_else(|| default_x_max(&self.model, &self.x0_hint()));
        Ok(solve_with(&self.model, solver, &GridParams::with_x_max(x_max))?)
    }

    pub fn x0_values(&self, bstar: f64) -> Vec<f64> {
        self.x0.iter().map(|x| x.resolve(bstar)).collect()
    }

    pub fn sim_config(&self) -> Option<SimConfig> {
        self.sim.map(|s| s.resolve(&self.model))
    }
}
