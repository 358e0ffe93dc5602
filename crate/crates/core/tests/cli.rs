use std::path::Path;
use std::process::{Command, Output};

use chrono::{Duration, TimeZone, Utc};
use relopt::models::{simulate, ModelSpec, OUParams};
use relopt::numeric::HOURS_PER_YEAR;

fn relopt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relopt"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write_ou_csv(path: &Path, truth: OUParams, hours: usize) {
    let dt = 1.0 / HOURS_PER_YEAR;
    let b = simulate(&ModelSpec::Ou { ou: truth }, truth.theta, None, (hours - 1) as f64 * dt, dt, 1, 11).unwrap();
    let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let mut text = String::from("timestamp,price\n");
    for (i, p) in b.path(0).iter().enumerate() {
        let t = t0 + Duration::hours(i as i64);
        text.push_str(&format!("{},{p}\n", t.to_rfc3339()));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn missing_data_file_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[data]\npath = \"nowhere.csv\"\n").unwrap();
    let out = relopt(dir.path(), &["--config", "run.toml", "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.csv"));
    assert!(!dir.path().join("relopt-out/series.csv").exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[contract]\nstrike = 3\n").unwrap();
    let out = relopt(dir.path(), &["--config", "run.toml", "price"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ou_fit_from_csv_recovers_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let truth = OUParams::new(300.0, 50.0, 400.0).unwrap();
    write_ou_csv(&dir.path().join("prices.csv"), truth, 50_000);
    std::fs::write(
        dir.path().join("run.toml"),
        "[data]\npath = \"prices.csv\"\n[model]\ntype = \"ou\"\n",
    )
    .unwrap();
    for cmd in ["ingest", "fit"] {
        let out = relopt(dir.path(), &["--config", "run.toml", "--reproducible", cmd]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = relopt(dir.path(), &["--config", "run.toml", "--reproducible", "strike"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("relopt-out/model.json")).unwrap();
    let ModelSpec::Ou { ou } = ModelSpec::from_json(&text).unwrap() else {
        panic!("expected an OU model: {text}");
    };
    assert!((ou.kappa / truth.kappa - 1.0).abs() < 0.05, "{ou:?}");
    assert!((ou.theta / truth.theta - 1.0).abs() < 0.05, "{ou:?}");
    assert!((ou.sigma / truth.sigma - 1.0).abs() < 0.05, "{ou:?}");
}

#[test]
fn flags_override_config_and_reports_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    write_ou_csv(&dir.path().join("prices.csv"), OUParams::new(300.0, 50.0, 400.0).unwrap(), 20_000);
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 1\n[data]\npath = \"prices.csv\"\n[model]\ntype = \"ou\"\nn_paths = 200\n[contract]\nK = 60\n",
    )
    .unwrap();
    let run = |cmd| {
        relopt(
            dir.path(),
            &["--config", "run.toml", "--seed", "9", "--out", "o", "--set", "contract.tau=2", "--reproducible", cmd],
        )
    };
    for cmd in ["ingest", "fit"] {
        assert!(run(cmd).status.success());
    }
    let out = run("price");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/price.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["config"]["contract"]["tau"], 2.0);
    assert!(v["config_fingerprint"].is_string());
    assert!(v.get("generated_at").is_none());
    assert!(v["result"]["premium"].as_f64().unwrap() > 0.0);
}
