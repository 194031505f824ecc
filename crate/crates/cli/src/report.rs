//! `harvest report`: the tables behind a run, written as files.

use std::path::Path;

use harvest_core::montecarlo::{chatter_convergence, simulate_payoff, HarvestPolicy, JumpThenReflect, RelaxedSweep};
use harvest_core::oclp::{feasibility_check_mu1star, run_lp, LpMode, Mu1StarReport};
use harvest_core::pipeline::SolvedSummary;
use harvest_core::value::value_at;
use serde::Serialize;

use crate::commands::{value_rows, LpSummary};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, table, to_json, Artifact, CsvRow};

pub const MU1STAR_INTERVALS: usize = 1024;

#[derive(Debug, Clone, Serialize)]
pub struct McRow {
    pub x0: f64,
    pub policy: &'static str,
    pub mean: f64,
    pub stderr: f64,
    /// Optimal value, or for `jump` the optimal value less the analytic gap.
    pub closed_form: f64,
    pub diff: f64,
    pub tolerance: f64,
    pub within: bool,
}

impl CsvRow for McRow {
    fn header() -> Vec<&'static str> {
        vec!["x0", "policy", "mean", "stderr", "closed_form", "diff", "tolerance", "within"]
    }
    fn record(&self) -> Vec<String> {
        vec![
            num(self.x0),
            self.policy.into(),
            num(self.mean),
            num(self.stderr),
            num(self.closed_form),
            num(self.diff),
            num(self.tolerance),
            self.within.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatterTableRow {
    pub x0: f64,
    pub n: u32,
    pub lump: f64,
    pub payoff: f64,
    pub stderr: f64,
    pub sweep_payoff: f64,
}

impl CsvRow for ChatterTableRow {
    fn header() -> Vec<&'static str> {
        vec!["x0", "n", "lump", "payoff", "stderr", "sweep_payoff"]
    }
    fn record(&self) -> Vec<String> {
        vec![
            num(self.x0),
            self.n.to_string(),
            num(self.lump),
            num(self.payoff),
            num(self.stderr),
            num(self.sweep_payoff),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LpEntry {
    pub x0: f64,
    pub full: LpSummary,
    pub aux: LpSummary,
    pub mu1star: Option<Mu1StarReport>,
}

#[derive(Debug, Clone, Serialize)]
struct Summary<'a> {
    model: &'a harvest_core::model::ModelSpec,
    solution: SolvedSummary,
    threshold: &'a harvest_core::threshold::Threshold,
}

/// Build every report file in memory.
pub fn build_report(cfg: &RunConfig) -> CliResult<Vec<Artifact>> {
    let s = cfg.solve()?;
    let (m, fs, th) = (&s.model, &s.fs, &s.threshold);
    let b = th.bstar;
    let x0s = cfg.x0_values(b);
    let fmts = &cfg.output.formats;
    let mut files = vec![Artifact::new(
        "summary.json",
        to_json(&Summary { model: m, solution: s.summary(), threshold: th }),
    )];

    files.extend(table("value_sweep", &value_rows(&s, &x0s)?, fmts));

    let mut mc = Vec::new();
    let mut chatter = Vec::new();
    if let Some(sc) = cfg.sim_config() {
        let sweep = RelaxedSweep { b };
        for &x0 in &x0s {
            let v = value_at(m, fs, th, x0)?.total;
            let res = simulate_payoff(m, &sweep, x0, &sc)?;
            let tol = (3.0 * res.stderr).max(0.015 * v);
            mc.push(McRow {
                x0,
                policy: "sweep",
                mean: res.mean,
                stderr: res.stderr,
                closed_form: v,
                diff: res.mean - v,
                tolerance: tol,
                within: (res.mean - v).abs() <= tol,
            });
            if x0 > b {
                let jump = JumpThenReflect { b };
                let target = v - (m.yield_fn.integral(b, x0) - m.yield_at(x0) * (x0 - b));
                let res = simulate_payoff(m, &jump, x0, &sc)?;
                let tol = (3.0 * res.stderr).max(0.015 * target);
                mc.push(McRow {
                    x0,
                    policy: "jump",
                    mean: res.mean,
                    stderr: res.stderr,
                    closed_form: target,
                    diff: res.mean - target,
                    tolerance: tol,
                    within: (res.mean - target).abs() <= tol,
                });
                if !cfg.chatter_n.is_empty() {
                    let sweep_lump = sweep.initial_harvest(m, x0).lump;
                    for r in chatter_convergence(m, th, x0, &sc, &cfg.chatter_n)? {
                        chatter.push(ChatterTableRow {
                            x0,
                            n: r.n,
                            lump: r.lump,
                            payoff: r.payoff,
                            stderr: r.stderr,
                            sweep_payoff: sweep_lump + (r.payoff - r.lump),
                        });
                    }
                }
            }
        }
    }
    files.extend(table("mc_vs_closed_form", &mc, fmts));
    files.extend(table("chatter", &chatter, fmts));

    let mut lp = Vec::new();
    for &x0 in &x0s {
        let full = run_lp(m, fs, th, x0, LpMode::Full, &cfg.lp)?;
        let aux = run_lp(m, fs, th, x0, LpMode::Aux, &cfg.lp)?;
        let mu1star = if x0 >= b { Some(feasibility_check_mu1star(m, fs, th, x0, MU1STAR_INTERVALS)?) } else { None };
        lp.push(LpEntry { x0, full: LpSummary::from(&full), aux: LpSummary::from(&aux), mu1star });
    }
    files.push(Artifact::new("lp_summary.json", to_json(&lp)));
    Ok(files)
}

pub fn write_artifacts(dir: &Path, files: &[Artifact]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for f in files {
        let p = dir.join(&f.name);
        std::fs::write(&p, &f.contents).map_err(|e| CliError::io(&p, e))?;
    }
    Ok(())
}

/// Build and write the report into `dir`; returns the files written.
pub fn run_report(cfg: &RunConfig, dir: &Path) -> CliResult<Vec<Artifact>> {
    let files = build_report(cfg)?;
    write_artifacts(dir, &files)?;
    Ok(files)
}
