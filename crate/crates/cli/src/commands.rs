//! One function per subcommand. Each returns its rendered outputs; the
//! binary decides where they go.

use harvest_core::model::{BoundaryClass, FellerIntegrals, IntegrationParams};
use harvest_core::montecarlo::{simulate_paths, simulate_payoff, PathOutcome, PolicyArgs, PolicyRegistry, SimConfig, SimResult};
use harvest_core::oclp::{feasibility_check_mu1star, run_lp, LpMode, LpParams, LpReport, LpStatus, Mu1StarReport, RowActivity, SupportAtom};
use harvest_core::pipeline::Solved;
use harvest_core::threshold::Threshold;
use harvest_core::value::{value_at, Branch, ValueBreakdown};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{num, to_csv, to_json, Artifact, CsvRow};

/// What a subcommand produced.
#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub stem: String,
    pub json: Option<String>,
    pub csv: Option<String>,
    /// Further files, written only with `--out`.
    pub extra: Vec<Artifact>,
    /// `Some(false)` when a check failed.
    pub passed: Option<bool>,
}

impl CommandOutput {
    fn both(stem: &str, json: String, csv: String) -> Self {
        Self { stem: stem.into(), json: Some(json), csv: Some(csv), ..Self::default() }
    }

    /// Text for stdout in format `f`.
    pub fn primary(&self, f: Format) -> CliResult<&str> {
        match f {
            Format::Json => self.json.as_deref(),
            Format::Csv => self.csv.as_deref(),
        }
        .ok_or_else(|| CliError::Config(format!("{} has no {} output", self.stem, f.extension())))
    }

    /// All files, as written under `--out`.
    pub fn artifacts(&self) -> Vec<Artifact> {
        let mut v = Vec::new();
        if let Some(j) = &self.json {
            v.push(Artifact::new(format!("{}.json", self.stem), j.clone()));
        }
        if let Some(c) = &self.csv {
            v.push(Artifact::new(format!("{}.csv", self.stem), c.clone()));
        }
        v.extend(self.extra.iter().cloned());
        v
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub boundary: BoundaryClass,
    pub scale: f64,
    pub probe: IntegrationParams,
    pub integrals: FellerIntegrals,
}

impl CsvRow for Classification {
    fn header() -> Vec<&'static str> {
        vec!["boundary", "scale", "sigma_1", "sigma_2", "sigma_3", "n_1", "n_2", "n_3"]
    }
    fn record(&self) -> Vec<String> {
        let mut r = vec![to_json(&self.boundary).trim().trim_matches('"').to_string(), num(self.scale)];
        r.extend(self.integrals.sigma.iter().map(|&v| num(v)));
        r.extend(self.integrals.n.iter().map(|&v| num(v)));
        r
    }
}

pub fn classify(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let m = &cfg.model;
    let probe = IntegrationParams::default();
    let c = Classification {
        boundary: m.classify_boundary_zero(&probe)?,
        scale: m.scale(),
        probe,
        integrals: m.feller_integrals(&probe),
    };
    Ok(CommandOutput::both("classify", to_json(&c), to_csv(std::slice::from_ref(&c))))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsiRow {
    pub x: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub ddpsi: f64,
    pub residual: f64,
}

impl CsvRow for PsiRow {
    fn header() -> Vec<&'static str> {
        vec!["x", "psi", "dpsi", "ddpsi", "residual"]
    }
    fn record(&self) -> Vec<String> {
        [self.x, self.psi, self.dpsi, self.ddpsi, self.residual].iter().map(|&v| num(v)).collect()
    }
}

/// ψ and its derivatives at `points` equispaced nodes of the solution range.
pub fn psi_table(s: &Solved, points: usize) -> CliResult<Vec<PsiRow>> {
    if points < 2 {
        return Err(CliError::Config("need at least two points".into()));
    }
    let (lo, hi) = (s.fs.x_min(), s.fs.x_max());
    (0..points)
        .map(|i| {
            let x = if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 };
            let [psi, dpsi, ddpsi] = s.fs.eval_at(x)?;
            let residual = if x > 0.0 { s.fs.residual_at(x)? } else { 0.0 };
            Ok(PsiRow { x, psi, dpsi, ddpsi, residual })
        })
        .collect()
}

pub fn psi(cfg: &RunConfig, points: usize) -> CliResult<CommandOutput> {
    let rows = psi_table(&cfg.solve()?, points)?;
    Ok(CommandOutput::both("psi", to_json(&rows), to_csv(&rows)))
}

impl CsvRow for Threshold {
    fn header() -> Vec<&'static str> {
        vec!["bstar", "h_max", "cond_i_ok", "cond_ii_ok", "cond_iii_ok", "worst_violation", "witness_x", "at_domain_edge"]
    }
    fn record(&self) -> Vec<String> {
        let r = &self.report;
        vec![
            num(self.bstar),
            num(self.h_max),
            r.cond_i_ok.to_string(),
            r.cond_ii_ok.to_string(),
            r.cond_iii_ok.to_string(),
            num(r.worst_violation),
            num(r.witness_x),
            self.at_domain_edge.to_string(),
        ]
    }
}

pub fn threshold(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let s = cfg.solve()?;
    let th = &s.threshold;
    let mut out = CommandOutput::both("threshold", to_json(th), to_csv(std::slice::from_ref(th)));
    out.passed = Some(th.report.all_ok());
    Ok(out)
}

impl CsvRow for ValueBreakdown {
    fn header() -> Vec<&'static str> {
        vec!["x0", "branch", "sweep_term", "reflect_term", "total"]
    }
    fn record(&self) -> Vec<String> {
        let branch = match self.branch {
            Branch::AtOrBelowBstar => "at_or_below_bstar",
            Branch::AboveBstar => "above_bstar",
        };
        vec![num(self.x0), branch.into(), num(self.sweep_term), num(self.reflect_term), num(self.total)]
    }
}

pub fn value_rows(s: &Solved, x0s: &[f64]) -> CliResult<Vec<ValueBreakdown>> {
    Ok(x0s.iter().map(|&x| value_at(&s.model, &s.fs, &s.threshold, x)).collect::<Result<_, _>>()?)
}

/// Value at `x0_override` if non-empty, else at the configured x₀ list.
pub fn value(cfg: &RunConfig, x0_override: &[f64]) -> CliResult<CommandOutput> {
    let s = cfg.solve()?;
    let x0s = if x0_override.is_empty() { cfg.x0_values(s.threshold.bstar) } else { x0_override.to_vec() };
    let rows = value_rows(&s, &x0s)?;
    Ok(CommandOutput::both("value", to_json(&rows), to_csv(&rows)))
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SimulateArgs {
    /// Policy name in the registry (reflect, jump, chatter, sweep).
    #[arg(long, default_value = "sweep")]
    pub policy: String,
    /// Barrier; b* when absent.
    #[arg(long)]
    pub b: Option<f64>,
    /// Number of chatter jumps.
    #[arg(long)]
    pub n: Option<u32>,
    /// Initial population; first configured x₀ when absent.
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shift the discrete barrier to cancel the projection overshoot.
    #[arg(long)]
    pub barrier_correction: bool,
    /// Also emit per-path outcomes (`paths.csv` under `--out`).
    #[arg(long)]
    pub per_path: bool,
}

impl CsvRow for SimResult {
    fn header() -> Vec<&'static str> {
        vec!["policy", "x0", "mean", "stderr", "n_paths", "extinct_fraction", "lump_term", "tail_bound"]
    }
    fn record(&self) -> Vec<String> {
        vec![
            self.policy.registry_name().into(),
            num(self.x0),
            num(self.mean),
            num(self.stderr),
            self.n_paths.to_string(),
            num(self.extinct_fraction),
            num(self.lump_term),
            num(self.tail_bound),
        ]
    }
}

impl CsvRow for PathOutcome {
    fn header() -> Vec<&'static str> {
        vec!["index", "payoff", "discounted_local_time", "extinct", "extinction_time"]
    }
    fn record(&self) -> Vec<String> {
        vec![
            self.index.to_string(),
            num(self.payoff),
            num(self.discounted_local_time),
            self.extinct.to_string(),
            self.extinction_time.map(num).unwrap_or_default(),
        ]
    }
}

fn sim_config(cfg: &RunConfig, a: &SimulateArgs) -> CliResult<SimConfig> {
    let m = &cfg.model;
    let base = cfg.sim_config();
    let seed = a.seed.or(base.map(|b| b.seed)).ok_or_else(|| {
        CliError::Config("simulation needs a seed (config sim.seed or --seed)".into())
    })?;
    let n_paths = a.paths.or(base.map(|b| b.n_paths)).unwrap_or(40_000);
    let d = base.unwrap_or_else(|| SimConfig::for_model(m, n_paths, seed));
    let sc = SimConfig {
        dt: a.dt.unwrap_or(d.dt),
        horizon: a.horizon.unwrap_or(d.horizon),
        n_paths,
        seed,
        barrier_correction: a.barrier_correction || base.is_some_and(|b| b.barrier_correction),
    };
    sc.validate(m)?;
    Ok(sc)
}

pub fn simulate(cfg: &RunConfig, a: &SimulateArgs) -> CliResult<CommandOutput> {
    let sc = sim_config(cfg, a)?;
    let s = cfg.solve()?;
    let b = a.b.unwrap_or(s.threshold.bstar);
    let x0 = match a.x0 {
        Some(x) => x,
        None => *cfg
            .x0_values(s.threshold.bstar)
            .first()
            .ok_or_else(|| CliError::Config("no x0: pass --x0 or list one in the config".into()))?,
    };
    let registry = PolicyRegistry::default();
    let policy = registry.create(&a.policy, &PolicyArgs { b, n: a.n })?;
    let res = simulate_payoff(&s.model, policy.as_ref(), x0, &sc)?;
    let mut out = CommandOutput::both("simulate", to_json(&res), to_csv(std::slice::from_ref(&res)));
    if a.per_path {
        let paths = simulate_paths(&s.model, policy.as_ref(), x0, &sc)?;
        out.extra.push(Artifact::new("paths.csv", to_csv(&paths)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LpCommandMode {
    Full,
    Aux,
    Mu1star,
}

#[derive(Debug, Clone, clap::Args)]
pub struct LpArgs {
    #[arg(long, value_enum, default_value = "full")]
    pub mode: LpCommandMode,
    /// Initial population; first configured x₀ when absent.
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub splines: Option<usize>,
    #[arg(long)]
    pub jumps: Option<usize>,
    /// Trapezoid cells for `--mode mu1star`.
    #[arg(long, default_value_t = 1024)]
    pub intervals: usize,
}

/// LP report without the per-row activity.
#[derive(Debug, Clone, Serialize)]
pub struct LpSummary {
    pub mode: LpMode,
    pub x0: f64,
    pub x_max: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub status: LpStatus,
    pub value: f64,
    pub closed_form_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub max_violation: f64,
    pub support: Vec<SupportAtom>,
}

impl From<&LpReport> for LpSummary {
    fn from(r: &LpReport) -> Self {
        Self {
            mode: r.mode,
            x0: r.x0,
            x_max: r.x_max,
            n_rows: r.n_rows,
            n_cols: r.n_cols,
            status: r.status,
            value: r.value,
            closed_form_value: r.closed_form_value,
            gap: r.gap,
            iterations: r.iterations,
            max_violation: r.max_violation,
            support: r.support.clone(),
        }
    }
}

impl CsvRow for LpSummary {
    fn header() -> Vec<&'static str> {
        vec!["mode", "x0", "status", "value", "closed_form_value", "gap", "n_rows", "n_cols", "support_size"]
    }
    fn record(&self) -> Vec<String> {
        vec![
            format!("{:?}", self.mode).to_lowercase(),
            num(self.x0),
            format!("{:?}", self.status).to_lowercase(),
            num(self.value),
            num(self.closed_form_value),
            num(self.gap),
            self.n_rows.to_string(),
            self.n_cols.to_string(),
            self.support.len().to_string(),
        ]
    }
}

impl CsvRow for RowActivity {
    fn header() -> Vec<&'static str> {
        vec!["name", "sense", "lhs", "rhs", "slack", "dual"]
    }
    fn record(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            to_json(&self.sense).trim().trim_matches('"').to_string(),
            num(self.lhs),
            num(self.rhs),
            num(self.slack),
            num(self.dual),
        ]
    }
}

impl CsvRow for Mu1StarReport {
    fn header() -> Vec<&'static str> {
        vec![
            "x0",
            "bstar",
            "n_intervals",
            "atom_weight",
            "constraint_lhs",
            "constraint_rhs",
            "residual",
            "objective",
            "closed_form_value",
            "objective_error",
        ]
    }
    fn record(&self) -> Vec<String> {
        vec![
            num(self.x0),
            num(self.bstar),
            self.n_intervals.to_string(),
            num(self.atom_weight),
            num(self.constraint_lhs),
            num(self.constraint_rhs),
            num(self.residual),
            num(self.objective),
            num(self.closed_form_value),
            num(self.objective_error),
        ]
    }
}

pub fn lp_params(cfg: &RunConfig, a: &LpArgs) -> LpParams {
    LpParams {
        n_states: a.states.unwrap_or(cfg.lp.n_states),
        n_splines: a.splines.unwrap_or(cfg.lp.n_splines),
        jump_levels: a.jumps.unwrap_or(cfg.lp.jump_levels),
        ..cfg.lp
    }
}

/// Full or auxiliary program: JSON summary with support atoms, CSV of the
/// active rows. `mu1star`: the discretized optimal harvest measure.
pub fn lp(cfg: &RunConfig, a: &LpArgs) -> CliResult<CommandOutput> {
    let s = cfg.solve()?;
    let x0 = match a.x0 {
        Some(x) => x,
        None => *cfg
            .x0_values(s.threshold.bstar)
            .first()
            .ok_or_else(|| CliError::Config("no x0: pass --x0 or list one in the config".into()))?,
    };
    let mode = match a.mode {
        LpCommandMode::Full => LpMode::Full,
        LpCommandMode::Aux => LpMode::Aux,
        LpCommandMode::Mu1star => {
            let r = feasibility_check_mu1star(&s.model, &s.fs, &s.threshold, x0, a.intervals)?;
            return Ok(CommandOutput::both("mu1star", to_json(&r), to_csv(std::slice::from_ref(&r))));
        }
    };
    let rep = run_lp(&s.model, &s.fs, &s.threshold, x0, mode, &lp_params(cfg, a))?;
    let active: Vec<RowActivity> = rep.rows.iter().filter(|r| r.active).cloned().collect();
    let mut out = CommandOutput::both("lp", to_json(&LpSummary::from(&rep)), to_csv(&active));
    out.passed = Some(rep.status == LpStatus::Optimal);
    Ok(out)
}
