//! End-to-end runs of the `labelboot` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use labelboot_cli::synth::{postings, write_postings, SynthConfig};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn labelboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelboot"))
        .args(args)
        .env_remove("LABELBOOT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn estimate_args<'a>(out_dir: &'a str, config: &'a str) -> Vec<&'a str> {
    vec![
        "estimate",
        "--config",
        config,
        "--boot-reps",
        "49",
        "--out",
        out_dir,
    ]
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(labelboot(&["--help"]).status.code(), Some(0));
    assert_eq!(labelboot(&["--version"]).status.code(), Some(0));
    let bad = labelboot(&["estimate", "--no-such-flag"]);
    assert_eq!(bad.status.code(), Some(2));
    let clash = labelboot(&["estimate", "--rates", "0.1,0.1,10", "--rates-file", "x.csv"]);
    assert_eq!(clash.status.code(), Some(2));
}

#[test]
fn input_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.csv");
    let out = labelboot(&[
        "estimate",
        "--data",
        missing.to_str().unwrap(),
        "--outcome",
        "y",
        "--label",
        "d",
        "--rates",
        "0.01,0.01,100",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));

    let csv = tmp.path().join("bad.csv");
    std::fs::write(&csv, "y,d\n1.0,0\n2.0,2\n").unwrap();
    let out = labelboot(&[
        "estimate",
        "--data",
        csv.to_str().unwrap(),
        "--outcome",
        "y",
        "--label",
        "d",
        "--rates",
        "0.01,0.01,100",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}

#[test]
fn estimation_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("flat.csv");
    let mut text = String::from("y,d,c\n");
    for i in 0..20 {
        text += &format!("{}.5,0,1\n", i % 7);
    }
    std::fs::write(&csv, text).unwrap();
    let out = labelboot(&[
        "estimate",
        "--data",
        csv.to_str().unwrap(),
        "--outcome",
        "y",
        "--label",
        "d",
        "--covariates",
        "c",
        "--rates",
        "0.01,0.01,100",
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bundled_estimate_writes_reproducible_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let config = data_dir().join("remote_work.toml");
    let config = config.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = labelboot(&estimate_args(a.to_str().unwrap(), config));
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = labelboot(&estimate_args(b.to_str().unwrap(), config));
    assert_eq!(stdout(&first), stdout(&second));

    let table = stdout(&first);
    let rows: Vec<&str> = table.lines().skip(5).collect();
    assert_eq!(rows.len(), 6, "{table}");
    for (row, title) in rows.iter().zip([
        "OLS",
        "BCHS",
        "No-label",
        "Fixed-label",
        "Coupled-label bootstrap",
        "Coupled-label, rotation",
    ]) {
        assert!(row.starts_with(title), "{row}");
    }

    let jsonl = read(&a, "estimates.jsonl");
    let first_line: serde_json::Value =
        serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    let hash = first_line["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(first_line["seed"], 1);
    assert!(table.contains(&hash));
    let diagnostics: serde_json::Value =
        serde_json::from_str(&read(&a, "diagnostics.json")).unwrap();
    assert_eq!(diagnostics["config_hash"], hash.as_str());
    assert_eq!(diagnostics["n"], 16000);
    // six methods times (remote, const, soc2 and fulltime indicators)
    assert_eq!(jsonl.lines().count() % 6, 0);
    for name in ["estimates.jsonl", "estimates.txt", "diagnostics.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
}

#[test]
fn seed_flag_changes_bootstrap_intervals_only() {
    let config = data_dir().join("remote_work.toml");
    let config = config.to_str().unwrap();
    let run = |seed: &str| {
        let out = labelboot(&[
            "estimate",
            "--config",
            config,
            "--boot-reps",
            "49",
            "--seed",
            seed,
        ]);
        stdout(&out)
    };
    let (one, two) = (run("1"), run("2"));
    let line = |text: &str, prefix: &str| {
        text.lines()
            .find(|l| l.starts_with(prefix))
            .unwrap()
            .to_string()
    };
    assert_eq!(line(&one, "OLS"), line(&two, "OLS"));
    assert_eq!(line(&one, "BCHS"), line(&two, "BCHS"));
    assert_ne!(
        line(&one, "Coupled-label bootstrap"),
        line(&two, "Coupled-label bootstrap")
    );
}

#[test]
fn smoke_simulation_reports_every_method() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let out = labelboot(&[
        "simulate",
        "--preset",
        "smoke",
        "--reps",
        "6",
        "--boot-reps",
        "29",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cells = read(&dir, "cells.jsonl");
    assert_eq!(cells.lines().count(), 6);
    for line in cells.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(
            rec["reps_completed"].as_u64().unwrap() + rec["failed_reps"].as_u64().unwrap(),
            6
        );
        assert_eq!(rec["B"], 29);
    }
    assert!(read(&dir, "table.txt").contains("config_hash"));
    let run: serde_json::Value = serde_json::from_str(&read(&dir, "run.json")).unwrap();
    assert_eq!(run["cells"].as_array().unwrap().len(), 1);
}

#[test]
fn synth_regenerates_bundled_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("remote_work.csv");
    let out = labelboot(&["synth", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let bundled = std::fs::read(data_dir().join("remote_work.csv")).unwrap();
    assert!(std::fs::read(&path).unwrap() == bundled);

    let mut buf = Vec::new();
    write_postings(&mut buf, &postings(&SynthConfig::default()).unwrap()).unwrap();
    assert!(buf == bundled);
}
