use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use harvest_cli::{build_report, run_report, run_verify, CliError, RunConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn harvest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harvest")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"{
  "model": {
    "family": "drifted_bm",
    "params": { "mu": 1.0, "sigma": 1.4142135623730951 },
    "discount": 1.0,
    "yield": { "kind": "constant", "params": { "p": 1.0 } }
  },
  "x0": [X0],
  "sim": { "n_paths": 2000, "seed": 3, "dt": 0.01 }
}"#;

fn small(x0: &str) -> String {
    SMALL.replace("X0", x0)
}

#[test]
fn shipped_configs_parse_and_validate() {
    for name in ["drifted_bm", "steep_exponential", "logistic", "gbm"] {
        let cfg = RunConfig::load(&configs().join(format!("{name}.json"))).unwrap();
        cfg.validate().unwrap();
    }
}

#[test]
fn relative_x0_entries_resolve_against_bstar() {
    let cfg = RunConfig::from_json(&small(r#"{ "times_bstar": 2.0 }, 1.5"#)).unwrap();
    let s = cfg.solve().unwrap();
    let b = s.threshold.bstar;
    assert_eq!(cfg.x0_values(b), vec![2.0 * b, 1.5]);
}

#[test]
fn bad_configs_are_usage_errors() {
    let zero = RunConfig::from_json(&small("0.0"));
    assert!(matches!(zero.and_then(|c| c.validate()), Err(CliError::Config(_))));
    let neg_alpha = small("1.0").replace(
        r#"{ "kind": "constant", "params": { "p": 1.0 } }"#,
        r#"{ "kind": "exponential", "params": { "p": 1.0, "alpha": -0.5 } }"#,
    );
    let e = RunConfig::from_json(&neg_alpha).and_then(|c| c.validate()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(RunConfig::from_json(&small("1.0").replace("\"x0\"", "\"x_0\"")).is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), &small("-1.0"));
    assert_eq!(harvest(&["--config", bad.to_str().unwrap(), "value"]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(harvest(&["--config", missing.to_str().unwrap(), "value"]).status.code(), Some(2));
    assert_eq!(harvest(&["value"]).status.code(), Some(2));

    let good = write_config(dir.path(), &small("0.5, 2.0"));
    let out = harvest(&["--config", good.to_str().unwrap(), "--format", "csv", "value"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("x0,branch,"));
}

#[test]
fn gbm_verify_reports_failures_with_exit_one() {
    let cfg = configs().join("gbm.json");
    let out = harvest(&["--config", cfg.to_str().unwrap(), "verify"]);
    assert_eq!(out.status.code(), Some(1));
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["overall"], false);
    // only the discretized full LP falls short of V, and only slightly
    for e in rep["entries"].as_array().unwrap() {
        if e["pass"] == false {
            let name = e["name"].as_str().unwrap();
            assert!(name.starts_with("lp.full_at_least_value"), "{name}");
        }
    }
}

#[test]
fn verify_and_report_are_deterministic() {
    let cfg = RunConfig::from_json(&small(r#"{ "times_bstar": 0.5 }, { "times_bstar": 2.0 }"#)).unwrap();
    let a = run_verify(&cfg).unwrap();
    let b = run_verify(&cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.overall, "{:?}", a.failures().collect::<Vec<_>>());
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let f1 = run_report(&cfg, d1.path()).unwrap();
    let f2 = run_report(&cfg, d2.path()).unwrap();
    assert_eq!(f1.len(), f2.len());
    for f in &f1 {
        let x = std::fs::read(d1.path().join(&f.name)).unwrap();
        let y = std::fs::read(d2.path().join(&f.name)).unwrap();
        assert_eq!(x, y, "{}", f.name);
    }
}

#[test]
fn empty_x0_list_gives_header_only_sweep() {
    let cfg = RunConfig::from_json(&small("")).unwrap();
    let files = build_report(&cfg).unwrap();
    let sweep = files.iter().find(|f| f.name == "value_sweep.csv").unwrap();
    assert_eq!(sweep.contents.lines().count(), 1);
    assert!(sweep.contents.starts_with("x0,"));
}

#[test]
fn logistic_report_is_written() {
    let cfg = RunConfig::load(&configs().join("logistic.json")).unwrap();
    let cfg = RunConfig { sim: None, ..cfg };
    let dir = tempfile::tempdir().unwrap();
    let files = run_report(&cfg, dir.path()).unwrap();
    for name in ["summary.json", "value_sweep.csv", "lp_summary.json"] {
        assert!(files.iter().any(|f| f.name == name), "{name}");
        assert!(dir.path().join(name).is_file());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["solution"]["boundary"], "natural");
}
