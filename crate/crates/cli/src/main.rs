use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use harvest_cli::commands::{self, CommandOutput, LpArgs, SimulateArgs};
use harvest_cli::report::write_artifacts;
use harvest_cli::{build_report, verify_output, CliError, CliResult, Format, RunConfig};

#[derive(Parser)]
#[command(name = "harvest", version, about = "Optimal relaxed harvesting of 1-D diffusions")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output files here instead of printing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Feller class of the boundary 0.
    Classify,
    /// Increasing fundamental solution on an even grid.
    Psi {
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// b*, f(b*)/ψ′(b*) and the optimality conditions.
    Threshold,
    /// Closed-form value at each x₀.
    Value {
        #[arg(long)]
        x0: Vec<f64>,
    },
    /// Monte Carlo payoff of one policy.
    Simulate(SimulateArgs),
    /// Occupation-measure programs.
    Lp(LpArgs),
    /// Run every check; exit 1 if any fails.
    Verify,
    /// Write the report tables.
    Report,
}

fn run(cli: &Cli) -> CliResult<bool> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let out: CommandOutput = match &cli.command {
        Command::Classify => commands::classify(&cfg)?,
        Command::Psi { points } => commands::psi(&cfg, *points)?,
        Command::Threshold => commands::threshold(&cfg)?,
        Command::Value { x0 } => commands::value(&cfg, x0)?,
        Command::Simulate(a) => commands::simulate(&cfg, a)?,
        Command::Lp(a) => commands::lp(&cfg, a)?,
        Command::Verify => verify_output(&cfg)?,
        Command::Report => {
            let dir = cli
                .out
                .clone()
                .or_else(|| cfg.output.dir.clone())
                .ok_or_else(|| CliError::Config("report needs --out or output.dir".into()))?;
            let files = build_report(&cfg)?;
            write_artifacts(&dir, &files)?;
            for f in &files {
                println!("{}", dir.join(&f.name).display());
            }
            return Ok(true);
        }
    };
    match &cli.out {
        Some(dir) => write_artifacts(dir, &out.artifacts())?,
        None => {
            let text = out.primary(cli.format)?;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io { path: "<stdout>".into(), source: e })?;
        }
    }
    Ok(out.passed.unwrap_or(true))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
