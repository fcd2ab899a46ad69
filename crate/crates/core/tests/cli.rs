use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use mtp_core::cli::{load_config, normalize, run_to_report, Command};
use serde_json::Value;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

/// Command a bundled config belongs to, from its file-name prefix.
fn command_for(name: &str) -> Command {
    let prefixes = [
        ("fit_lsp", Command::FitLsp),
        ("boxdim", Command::Boxdim),
        ("minkowski", Command::Minkowski),
        ("transform", Command::Transform),
        ("cover", Command::Cover),
        ("cantor_verify", Command::CantorVerify),
        ("cantor", Command::CantorBuild),
        ("randsim", Command::Randsim),
    ];
    prefixes
        .iter()
        .find(|(p, _)| name.starts_with(p))
        .map(|(_, c)| *c)
        .unwrap()
}

fn bundled() -> Vec<(String, Command, PathBuf)> {
    let mut v: Vec<_> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_str().unwrap().to_string();
            (name.clone(), command_for(&name), p)
        })
        .collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

#[test]
fn bundled_configs_round_trip() {
    let all = bundled();
    assert!(all.len() >= 10);
    for (name, cmd, path) in all {
        let raw = load_config(cmd, &path, &[], None).unwrap();
        let once = normalize(cmd, raw).unwrap_or_else(|e| panic!("{name}: {e}"));
        let twice = normalize(cmd, once.clone()).unwrap();
        assert_eq!(once, twice, "{name}");
    }
}

fn golden(name: &str) {
    let path = configs_dir().join(format!("{name}.json"));
    let cmd = command_for(name);
    let cfg = load_config(cmd, &path, &[], None).unwrap();
    let (report, _) = run_to_report(cmd, cfg, &configs_dir(), Some(2)).unwrap();
    let want: Value = serde_json::from_str(
        &fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.results.json")))
            .unwrap(),
    )
    .unwrap();
    assert_eq!(report.results, want, "{name} drifted from its golden results");
    // the echoed config reproduces the run
    let (again, _) = run_to_report(cmd, report.config.clone(), &configs_dir(), Some(3)).unwrap();
    assert_eq!(again.results, report.results);
}

#[test]
fn golden_transform() {
    golden("transform_sqrt");
}

#[test]
fn golden_randsim_points() {
    golden("randsim_points");
}

#[test]
fn golden_fit_lsp_cantor() {
    golden("fit_lsp_cantor");
}

fn mtp(args: &[&str]) -> (i32, String) {
    let out = Proc::new(env!("CARGO_BIN_EXE_mtp")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_exit_codes_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();

    let (code, err) = mtp(&["transform", "--config", "/no/such/file.json", "--out", out_s]);
    assert_eq!(code, 2, "{err}");
    assert!(!out.exists());

    let cfg = configs_dir().join("transform_sqrt.json");
    let (code, err) = mtp(&["transform", "--config", cfg.to_str().unwrap(), "--out", out_s]);
    assert_eq!(code, 0, "{err}");
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["rows"][0]["tilde_upsilon"].as_f64(), Some(0.2));
    assert!(out.join("tables/transform.csv").exists());
    assert!(report["version"].is_string() && report["wall_time_s"].is_number());

    // validation failure: kappa out of range
    let (code, _) = mtp(&[
        "transform",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_s,
        "--set",
        "gauges.kappa=1.5",
    ]);
    assert_eq!(code, 2);
    // unknown key
    let (code, _) = mtp(&[
        "transform",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_s,
        "--set",
        "bogus=1",
    ]);
    assert_eq!(code, 2);
    // transform takes no seed
    let (code, _) = mtp(&[
        "transform",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_s,
        "--seed",
        "3",
    ]);
    assert_eq!(code, 2);

    // coverage shortfall: the stage window is too short to reach the target
    let kgb = configs_dir().join("cover_kgb_points.json");
    let (code, err) = mtp(&[
        "cover",
        "--config",
        kgb.to_str().unwrap(),
        "--out",
        out_s,
        "--set",
        "j_max=51",
    ]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn seed_and_overrides_apply() {
    let path = configs_dir().join("randsim_points.json");
    let cfg = load_config(Command::Randsim, &path, &["n_list=[64,128,256,512]".into()], Some(99)).unwrap();
    assert_eq!(cfg["scheme"]["master_seed"], 99);
    assert_eq!(cfg["n_list"].as_array().unwrap().len(), 4);
    let a = run_to_report(Command::Randsim, cfg.clone(), &configs_dir(), Some(1))
        .unwrap()
        .0;
    let b = run_to_report(Command::Randsim, cfg, &configs_dir(), Some(4)).unwrap().0;
    assert_eq!(a.results, b.results);
}
