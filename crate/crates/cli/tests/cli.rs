use std::fs;
use std::path::Path;
use std::process::Command;

use imlab::config::{ExperimentConfig, OneOrMany, Preset, Scenario};
use imlab::report;
use imlab::scenarios::{run_scenario, RunError};

fn imlab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_imlab")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn defaults_reference_parses() {
    let c = ExperimentConfig::defaults();
    assert_eq!(c.scenario, OneOrMany::One(Scenario::Roundtrip));
    assert_eq!(c.problem.preset, Preset::BurgersCutoff);
    assert_eq!(c.problem.n_total, 128);
    assert_eq!(c.m(), 1);
}

#[test]
fn user_values_override_defaults() {
    let c = ExperimentConfig::from_toml("seed = 9\n[problem]\npreset = \"coupled-2d-system\"\ndt = 5e-4\n").unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.m(), 2);
    assert_eq!(c.problem.dt, 5e-4);
    assert_eq!(c.problem.n_total, 128);
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        "bogus = 1\n",
        "[problem]\npreset = \"kdv\"\n",
        "[problem]\npreset = \"coupled-2d-system\"\nm = 3\n",
        "[problem]\nk = 4096\n",
        "[problem]\nlength = -1.0\n",
        "scenario = \"everything\"\n",
    ] {
        assert!(ExperimentConfig::from_toml(bad).is_err(), "accepted: {bad}");
    }
}

#[test]
fn scenario_names_roundtrip() {
    for s in Scenario::ALL {
        assert_eq!(Scenario::parse(s.name()), Some(s));
    }
}

#[test]
fn core_errors_map_to_exit_classes() {
    let e: RunError = imlab_core::Error::Solver("x".into()).into();
    assert_eq!(e.kind(), "numerical");
    let e: RunError = imlab_core::Error::Configuration("x".into()).into();
    assert_eq!(e.kind(), "configuration");
    let e: RunError = imlab_core::Error::Precondition("x".into()).into();
    assert_eq!(e.kind(), "configuration");
}

#[test]
fn zero_preset_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"roundtrip\"\n[problem]\npreset = \"zero\"\nm = 2\n");
    let out = dir.path().join("out");
    let (code, _) = imlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let rows = fs::read_to_string(out.join("roundtrip/roundtrip.csv")).unwrap();
    assert!(rows.starts_with("index,h1_norm,deviation"));
    let mut r = csv::Reader::from_path(out.join("roundtrip/roundtrip.csv")).unwrap();
    for rec in r.records() {
        let dev: f64 = rec.unwrap()[2].parse().unwrap();
        assert!(dev <= 1e-12, "{dev}");
    }
}

#[test]
fn gap_table_reference_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml("[problem]\npreset = \"zero\"\n[gap_table]\narithmetic_n = 100\n").unwrap();
    cfg.out = dir.path().to_path_buf();
    let sum = run_scenario(&cfg, Scenario::GapTable).unwrap();
    assert!(sum.pass);
    let mut r = csv::Reader::from_path(dir.path().join("gap-table/gap_table.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let row = r.records().map(|x| x.unwrap()).find(|rec| &rec[col("n")] == "5").unwrap();
    assert_eq!(row[col("gap_diff")].parse::<f64>().unwrap(), 11.0);
    assert!((row[col("ratio")].parse::<f64>().unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[roundtrip]\ntol = 1e-30\nfields = 2\n");
    let out = dir.path().join("out");
    let (code, _) = imlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[problem]\nn_total = 2\n");
    assert_eq!(imlab(&["run", "--config", &bad]).0, 2);
    let missing = dir.path().join("nope.toml");
    assert_eq!(imlab(&["run", "--config", missing.to_str().unwrap()]).0, 2);
    let ok = write_config(dir.path(), "");
    let out = dir.path().join("out");
    assert_eq!(imlab(&["run", "--config", &ok, "--scenario", "nonsense", "--out", out.to_str().unwrap()]).0, 2);
    // a gradient-only scenario with a semilinear preset
    let (code, _) = imlab(&["run", "--config", &ok, "--scenario", "upsilon-audit", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let err = fs::read_to_string(out.join("upsilon-audit/error.json")).unwrap();
    assert!(err.contains("\"kind\": \"configuration\""));
}

#[test]
fn report_of_empty_directory_has_no_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = imlab(&["report", "--in", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(!text.lines().any(|l| l.starts_with("| 1 ") || l.starts_with("| roundtrip")));
}

#[test]
fn report_lists_every_criterion_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"roundtrip\"\n[roundtrip]\nfields = 3\n");
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(imlab(&["run", "--config", &cfg, "--out", o, "--seed", "7"]).0, 0);
    let first = fs::read(out.join("roundtrip/summary.json")).unwrap();
    let (code, text) = imlab(&["report", "--in", o]);
    assert_eq!(code, 0);
    for (id, _, _) in report::CRITERIA {
        assert!(text.lines().any(|l| l.starts_with(&format!("| {id} |"))), "criterion {id}");
    }
    assert!(text.contains("| 2 | diffeomorphism roundtrip | PASS |"));
    assert!(text.contains("| 7 | exponential tracking | SKIPPED |"));
    assert_eq!(imlab(&["run", "--config", &cfg, "--out", o, "--seed", "7"]).0, 0);
    assert_eq!(first, fs::read(out.join("roundtrip/summary.json")).unwrap());
    assert_eq!(text, imlab(&["report", "--in", o]).1);
}

#[test]
fn upsilon_audit_on_general_preset() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml("[problem]\npreset = \"general-f(u,ux)\"\n[upsilon]\npairs = 10\n").unwrap();
    cfg.out = dir.path().to_path_buf();
    let sum = run_scenario(&cfg, Scenario::UpsilonAudit).unwrap();
    assert!(sum.pass, "{:?}", sum.checks);
}
