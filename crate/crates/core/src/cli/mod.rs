//! `mtp` command-line front end: config loading, overrides, report emission.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use commands::{execute, normalize, Command, Outcome};

use crate::error::{Error, Result};
use crate::io::write_json;

#[derive(Debug, Parser)]
#[command(name = "mtp", version, about = "Mass transference toolkit")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for report.json and tables/.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dotted-path override, e.g. `--set samples=200000` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub threads: usize,
    pub wall_time_s: f64,
    pub results: Value,
    pub warnings: Vec<String>,
}

/// Applies `key.path=value`; the value is read as JSON and falls back to a string.
pub fn apply_override(cfg: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not KEY=VALUE")))?;
    if key.is_empty() {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    set_path(cfg, &parts, value).map_err(|e| Error::Config(format!("override `{spec}`: {e}")))
}

fn set_path(cfg: &mut Value, path: &[&str], value: Value) -> std::result::Result<(), String> {
    let mut cur = cfg;
    for (i, part) in path.iter().enumerate() {
        let last = i + 1 == path.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| format!("`{part}` is not an array index"))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| format!("index {idx} out of range (length {len})"))?
            }
            Value::Object(map) => map.entry(part.to_string()).or_insert(if last {
                Value::Null
            } else {
                Value::Object(Default::default())
            }),
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut()
                    .unwrap()
                    .entry(part.to_string())
                    .or_insert(Value::Null)
            }
            _ => return Err(format!("`{part}` descends into a scalar")),
        };
    }
    *cur = value;
    Ok(())
}

/// Reads the config, applies overrides and the seed flag.
pub fn load_config(cmd: Command, path: &Path, overrides: &[String], seed: Option<u64>) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if !cfg.is_object() {
        return Err(Error::Config("config must be a JSON object".into()));
    }
    for o in overrides {
        apply_override(&mut cfg, o)?;
    }
    if let Some(s) = seed {
        match cmd.seed_path(&cfg) {
            Some(p) => set_path(&mut cfg, p, Value::from(s)).map_err(Error::Config)?,
            None => return Err(Error::Config(format!("{} takes no seed", cmd.name()))),
        }
    }
    Ok(cfg)
}

/// Runs a command in a pool of `threads` workers and wraps the outcome in a report.
pub fn run_to_report(cmd: Command, cfg: Value, base: &Path, threads: Option<usize>) -> Result<(RunReport, Outcome)> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let start = Instant::now();
    let mut outcome = pool.install(|| execute(cmd, cfg, base))?;
    let report = RunReport {
        command: cmd.name().into(),
        version: crate::VERSION.into(),
        config: std::mem::take(&mut outcome.config),
        threads: pool.current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        results: std::mem::take(&mut outcome.results),
        warnings: outcome.warnings.clone(),
    };
    Ok((report, outcome))
}

fn write_artifacts(out: &Path, report: &RunReport, outcome: &Outcome) -> Result<()> {
    let tables = out.join("tables");
    fs::create_dir_all(&tables)?;
    write_json(&out.join("report.json"), report)?;
    for (name, t) in &outcome.tables {
        t.write(&tables.join(format!("{name}.csv")))?;
    }
    for (name, v) in &outcome.files {
        write_json(&out.join(format!("{name}.json")), v)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Option<String>> {
    let cfg = load_config(cli.command, &cli.config, &cli.overrides, cli.seed)?;
    let base = cli.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let (report, outcome) = run_to_report(cli.command, cfg, &base, cli.threads)?;
    write_artifacts(&cli.out, &report, &outcome)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(outcome.failure)
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(None) => 0,
        Ok(Some(msg)) => {
            eprintln!("error: {msg}");
            3
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides() {
        let mut v = json!({"a": {"b": 1}, "xs": [1, 2]});
        apply_override(&mut v, "a.b=2.5").unwrap();
        apply_override(&mut v, "a.c.d=\"s\"").unwrap();
        apply_override(&mut v, "xs.1=7").unwrap();
        apply_override(&mut v, "name=cantor").unwrap();
        assert_eq!(
            v,
            json!({"a": {"b": 2.5, "c": {"d": "s"}}, "xs": [1, 7], "name": "cantor"})
        );
        assert!(apply_override(&mut v, "xs.5=1").is_err());
        assert!(apply_override(&mut v, "a.b.c=1").is_err());
        assert!(apply_override(&mut v, "noequals").is_err());
    }

    #[test]
    fn transform_example() {
        let cfg = json!({
            "gauges": {"f": {"kind": "power", "s": 0.5}, "g": {"kind": "power", "s": 1.0}, "kappa": 0.0, "lambda": 2.0},
            "upsilon": [0.04]
        });
        let (rep, _) = run_to_report(Command::Transform, cfg, Path::new("."), Some(1)).unwrap();
        let t = rep.results["rows"][0]["tilde_upsilon"].as_f64().unwrap();
        assert!((t - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_rejected() {
        let cfg = json!({"mode": "five_r", "balls": [], "bogus": 1});
        let err = run_to_report(Command::Cover, cfg, Path::new("."), Some(1)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let cfg = json!({"set": {"model": {"variant": "points", "points": [[0.0]]}}});
        let err = run_to_report(Command::Boxdim, cfg, Path::new("."), Some(1)).unwrap_err();
        assert!(err.to_string().contains("master_seed"));
    }

    #[test]
    fn missing_config_exits_2_without_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let code = main_from([
            "mtp",
            "transform",
            "--config",
            "/nonexistent/cfg.json",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
        assert!(!out.exists());
    }
}
