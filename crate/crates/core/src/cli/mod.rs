//! Command-line front end.
//!
//! Every command can be driven by flags, by a JSON run configuration
//! (`--config`), or both; flags override file values. A run configuration
//! looks like
//!
//! ```json
//! {
//!   "command": "clt-check",
//!   "model": {"kind": "GBM", "params": {"r": 0.05, "sigma": 0.2}, "x0": [100.0], "dim": 1},
//!   "sim": {"n_paths": 100000, "seed": 7, "scheme": "Exact"},
//!   "params": {"mapping": "log-price", "t_schedule": [1e-2, 1e-6]},
//!   "out_dir": "runs/clt"
//! }
//! ```
//!
//! Each run writes its CSV/JSON reports and a `manifest.json` into the output
//! directory. Exit status: 0 when every verdict passes, 2 when a verdict
//! fails, 1 on input errors (nothing is written in that case).

mod commands;
mod grid;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub use commands::Artifact;
pub use grid::{parse_grid, Grid};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::simulate::{worker_pool, Scheme, SimConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "smalltime", version, about = "Small-time limit checks for semimartingale models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Normalized increments against their Gaussian limit.
    CltCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::CltParams,
    },
    /// Rescaled paths against Brownian motion.
    FcltCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::FcltParams,
    },
    /// Envelopes for P(X_t > X_0), with optional bracketing checks.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::BoundsParams,
    },
    /// Monte Carlo digital prices and the at-the-money limit.
    Digital {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::DigitalParams,
    },
    /// At-the-money implied volatility slope and its bands.
    Skew {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::SkewParams,
    },
    /// Small-time rate function of a one-dimensional diffusion.
    Ldp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::LdpParams,
    },
    /// Closed-form tables for the counterexample models.
    Examples {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::ExamplesParams,
    },
    /// Runs every JSON run configuration in a directory.
    Reproduce {
        /// Directory of run configurations (`*.json`).
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: SMALLTIME_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Model specification as inline JSON.
    #[arg(long)]
    model: Option<String>,
    /// `euler` or `exact`.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    max_step: Option<f64>,
    #[arg(long)]
    chunk_size: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl SimSettings {
    pub fn to_config(&self, default_paths: usize) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(self.n_paths.unwrap_or(default_paths), self.seed.unwrap_or(0));
        if let Some(s) = self.scheme {
            cfg = cfg.with_scheme(s);
        }
        if let Some(c) = self.chunk_size {
            cfg = cfg.with_chunk_size(c);
        }
        if let Some(h) = self.max_step {
            cfg = cfg.with_max_step(h);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A fully merged run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Outcome of one run: artifacts held in memory until the run succeeds.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub pass: bool,
    pub artifacts: Vec<Artifact>,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    match s.to_ascii_lowercase().as_str() {
        "euler" | "euler-maruyama" | "eulermaruyama" => Ok(Scheme::EulerMaruyama),
        "exact" => Ok(Scheme::Exact),
        _ => Err(Error::InvalidConfig(format!("unknown scheme `{s}`; use euler or exact"))),
    }
}

fn merge_objects(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge_objects(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn merged_config<P: Serialize>(command: &str, common: &Common, params: &P) -> Result<RunConfig> {
    let mut doc = match &common.config {
        Some(p) => serde_json::from_str::<Value>(&std::fs::read_to_string(p)?)?,
        None => json!({}),
    };
    if !doc.is_object() {
        return Err(Error::InvalidConfig("run configuration must be a JSON object".into()));
    }
    if let Some(c) = doc.get("command").and_then(Value::as_str) {
        if c != command {
            return Err(Error::InvalidConfig(format!("configuration is for `{c}`, not `{command}`")));
        }
    }
    let mut overlay = Map::new();
    overlay.insert("command".into(), json!(command));
    if let Some(m) = &common.model {
        overlay.insert("model".into(), serde_json::from_str::<Value>(m)?);
    }
    let mut sim = Map::new();
    if let Some(s) = common.seed {
        sim.insert("seed".into(), json!(s));
    }
    if let Some(n) = common.paths {
        sim.insert("n_paths".into(), json!(n));
    }
    if let Some(s) = &common.scheme {
        sim.insert("scheme".into(), serde_json::to_value(parse_scheme(s)?)?);
    }
    if let Some(h) = common.max_step {
        sim.insert("max_step".into(), json!(h));
    }
    if let Some(c) = common.chunk_size {
        sim.insert("chunk_size".into(), json!(c));
    }
    overlay.insert("sim".into(), Value::Object(sim));
    overlay.insert("params".into(), serde_json::to_value(params)?);
    if let Some(o) = &common.out {
        overlay.insert("out_dir".into(), json!(o));
    }
    if let Some(t) = common.threads {
        overlay.insert("threads".into(), json!(t));
    }
    merge_objects(&mut doc, Value::Object(overlay));
    Ok(serde_json::from_value(doc)?)
}

/// Runs a configuration without touching the file system (except for inputs
/// the command itself reads, such as a batch file).
pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    let pool = worker_pool(config.threads)?;
    pool.install(|| commands::dispatch(config))
}

fn write_outputs(config: &RunConfig, outcome: &RunOutcome, dir: &Path, wall: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in &outcome.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    let manifest = json!({
        "command": config.command,
        "config": config,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.sim.seed.unwrap_or(0),
        "wall_time_seconds": wall,
        "pass": outcome.pass,
        "artifacts": outcome.artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn default_out(command: &str) -> PathBuf {
    PathBuf::from("runs").join(command)
}

/// Executes a configuration, writes its artifacts and returns the exit code.
pub fn run(config: &RunConfig) -> i32 {
    let start = Instant::now();
    match execute(config) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            // examples only print unless an output directory is requested
            if config.out_dir.is_some() || config.command != "examples" {
                let dir = config.out_dir.clone().unwrap_or_else(|| default_out(&config.command));
                if let Err(e) = write_outputs(config, &outcome, &dir, start.elapsed().as_secs_f64()) {
                    eprintln!("error: {e}");
                    return EXIT_INPUT;
                }
            }
            if outcome.pass {
                EXIT_PASS
            } else {
                EXIT_VERDICT
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

#[derive(Debug, Serialize)]
struct SuiteRow {
    name: String,
    command: String,
    status: &'static str,
    exit_code: i32,
}

/// Runs every `*.json` configuration in `suite` (sorted by file name) into
/// `out/<file stem>/` and writes `summary.csv`. Exit 1 if any configuration
/// is invalid, else 2 if any verdict fails, else 0.
pub fn reproduce_all(suite: &Path, out: &Path, threads: Option<usize>) -> i32 {
    let mut entries: Vec<PathBuf> = match std::fs::read_dir(suite) {
        Ok(rd) => {
            rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "json")).collect()
        }
        Err(e) => {
            eprintln!("error: cannot read suite {}: {e}", suite.display());
            return EXIT_INPUT;
        }
    };
    entries.sort();
    let mut rows = Vec::new();
    for path in &entries {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let (command, code) = match RunConfig::from_path(path) {
            Ok(mut cfg) => {
                cfg.out_dir = Some(out.join(&name));
                if threads.is_some() {
                    cfg.threads = threads;
                }
                eprintln!("== {name} ({})", cfg.command);
                (cfg.command.clone(), run(&cfg))
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                (String::new(), EXIT_INPUT)
            }
        };
        let status = match code {
            EXIT_PASS => "pass",
            EXIT_VERDICT => "fail",
            _ => "error",
        };
        rows.push(SuiteRow { name, command, status, exit_code: code });
    }
    let write = || -> Result<()> {
        std::fs::create_dir_all(out)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(out.join("summary.csv"))?;
        w.write_record(["name", "command", "status", "exit_code"])?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    };
    if let Err(e) = write() {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    println!("{} configurations: {} pass", rows.len(), rows.iter().filter(|r| r.exit_code == EXIT_PASS).count());
    if rows.iter().any(|r| r.exit_code == EXIT_INPUT) {
        EXIT_INPUT
    } else if rows.iter().any(|r| r.exit_code == EXIT_VERDICT) {
        EXIT_VERDICT
    } else {
        EXIT_PASS
    }
}

/// Entry point of the `smalltime` binary; returns the process exit code.
pub fn main() -> i32 {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let merged = match &cli.command {
        Cmd::CltCheck { common, params } => merged_config("clt-check", common, params),
        Cmd::FcltCheck { common, params } => merged_config("fclt-check", common, params),
        Cmd::Bounds { common, params } => merged_config("bounds", common, params),
        Cmd::Digital { common, params } => merged_config("digital", common, params),
        Cmd::Skew { common, params } => merged_config("skew", common, params),
        Cmd::Ldp { common, params } => merged_config("ldp", common, params),
        Cmd::Examples { common, params } => merged_config("examples", common, params),
        Cmd::Reproduce { suite, out, threads } => {
            let out = out.clone().unwrap_or_else(|| default_out("reproduce"));
            return reproduce_all(suite, &out, *threads);
        }
    };
    match merged {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"command":"bounds","sim":{"seed":3,"n_paths":10},"params":{"c":0.5,"t_grid":[0.1,0.2]}}"#,
        )
        .unwrap();
        let common = Common { config: Some(path), seed: Some(9), ..Common::default() };
        let params = commands::BoundsParams { c: Some(0.25), ..Default::default() };
        let cfg = merged_config("bounds", &common, &params).unwrap();
        assert_eq!(cfg.sim.seed, Some(9));
        assert_eq!(cfg.sim.n_paths, Some(10));
        assert_eq!(cfg.params["c"], json!(0.25));
        assert_eq!(cfg.params["t_grid"], json!([0.1, 0.2]));
        assert!(merged_config("skew", &common, &params).is_err());
    }

    #[test]
    fn unknown_keys_are_input_errors() {
        assert!(RunConfig::from_json(r#"{"command":"bounds","bogus":1}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"command":"bounds","params":{"c":0.5,"nope":1}}"#).unwrap();
        assert!(execute(&cfg).is_err());
        let cfg = RunConfig::from_json(r#"{"command":"frobnicate"}"#).unwrap();
        assert!(execute(&cfg).is_err());
    }

    #[test]
    fn malformed_config_exits_one_without_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.json");
        std::fs::write(&cfg, "{ not json").unwrap();
        let out = dir.path().join("out");
        let code =
            main_from(["smalltime", "bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_INPUT);
        assert!(!out.exists());
        assert_eq!(main_from(["smalltime", "bounds", "--bogus-flag"]), EXIT_INPUT);
    }

    #[test]
    fn bounds_command_writes_curve_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("b1");
        let code = main_from([
            "smalltime",
            "bounds",
            "--c",
            "0.5",
            "--t-grid",
            "1e-6:1e-1:log:20",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_PASS);
        let csv = std::fs::read_to_string(out.join("bounds.csv")).unwrap();
        assert_eq!(csv.lines().count(), 21);
        let manifest: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], "bounds");
        assert!(manifest["wall_time_seconds"].is_number());
        assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn empty_suite_passes_with_empty_summary() {
        let dir = tempfile::tempdir().unwrap();
        let suite = dir.path().join("suite");
        std::fs::create_dir(&suite).unwrap();
        let out = dir.path().join("out");
        assert_eq!(reproduce_all(&suite, &out, Some(1)), EXIT_PASS);
        let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
        assert_eq!(summary.trim(), "name,command,status,exit_code");
    }

    #[test]
    fn suite_with_failing_verdict_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let suite = dir.path().join("suite");
        std::fs::create_dir(&suite).unwrap();
        std::fs::write(
            suite.join("a_ok.json"),
            r#"{"command":"ldp","params":{"sigma":"const:0.5","x0":0.0,"eps":0.3}}"#,
        )
        .unwrap();
        // a wrong expectation makes the verdict fail
        std::fs::write(
            suite.join("b_fail.json"),
            r#"{"command":"ldp","params":{"sigma":"linear:0,1","x0":1.0,"eps":1.0,"expect":0.3}}"#,
        )
        .unwrap();
        let out = dir.path().join("out");
        assert_eq!(reproduce_all(&suite, &out, Some(1)), EXIT_VERDICT);
        let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 3);
        assert!(summary.contains("a_ok,ldp,pass,0"));
        assert!(summary.contains("b_fail,ldp,fail,2"));
        assert!(out.join("a_ok").join("manifest.json").exists());
    }
}
