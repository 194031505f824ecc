//! Library side of the `harvest` binary: configuration, subcommands, the
//! verification suite and report files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod verify;

pub use config::{Format, RunConfig};
pub use error::{CliError, CliResult};
pub use report::{build_report, run_report};
pub use verify::{run_verify, VerifyEntry, VerifyReport};

use commands::CommandOutput;
use output::{to_csv, to_json};

/// `harvest verify` as rendered output; `passed` mirrors the overall flag.
pub fn verify_output(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let rep = run_verify(cfg)?;
    Ok(CommandOutput {
        stem: "verify".into(),
        json: Some(to_json(&rep)),
        csv: Some(to_csv(&rep.entries)),
        extra: Vec::new(),
        passed: Some(rep.overall),
    })
}
