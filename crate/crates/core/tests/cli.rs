use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn switchgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_switchgame"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(dir: &Path, command: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = example(config);
    let mut args = vec![
        command,
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    switchgame(&args)
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn every_command_writes_its_files() {
    let cases: [(&str, &[&str]); 6] = [
        ("riccati", &["riccati.csv"]),
        ("values", &["values.csv"]),
        ("schedule", &["schedule.csv"]),
        ("simulate", &["trajectory.csv", "summary.csv"]),
        ("compare", &["compare.csv"]),
        ("poa", &["values.csv"]),
    ];
    for (command, files) in cases {
        let dir = TempDir::new().unwrap();
        let out = run_in(dir.path(), command, "paper_sim.json", &["--runs", "200"]);
        assert!(
            out.status.success(),
            "{command}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        for f in files {
            let text = read(dir.path(), f);
            assert!(text.lines().count() >= 2, "{command}/{f} is empty");
        }
    }
}

#[test]
fn scalar_riccati_csv() {
    let dir = TempDir::new().unwrap();
    assert!(run_in(dir.path(), "riccati", "scalar.json", &[])
        .status
        .success());
    let text = read(dir.path(), "riccati.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,P1_00,P2_00,L1_00,L2_00");
    let row0: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row0[1], "1.2222222222222223e0");
    assert_eq!(row0[1].parse::<f64>().unwrap(), 11.0 / 9.0);
    assert!((row0[3].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(
        lines.next().unwrap(),
        "1,1.0000000000000000e0,1.0000000000000000e0,,"
    );
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let out = run_in(
            dir.path(),
            "simulate",
            "paper_sim.json",
            &["--seed", "5", "--runs", "300"],
        );
        assert!(out.status.success());
    }
    for f in ["trajectory.csv", "summary.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f));
    }
}

#[test]
fn schedule_matches_values_table() {
    let dir = TempDir::new().unwrap();
    assert!(run_in(dir.path(), "schedule", "paper_sim.json", &[])
        .status
        .success());
    assert!(run_in(dir.path(), "values", "paper_sim.json", &[])
        .status
        .success());
    let schedule = read(dir.path(), "schedule.csv");
    let rows: Vec<(usize, bool)> = schedule
        .lines()
        .skip(1)
        .map(|l| {
            let (k, d) = l.split_once(',').unwrap();
            (k.parse().unwrap(), d == "1")
        })
        .collect();
    assert_eq!(rows.len(), 16);
    assert!(!rows[15].1);

    // walk the node table from the initial node
    let values = read(dir.path(), "values.csv");
    let table: Vec<Vec<&str>> = values
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let mut age = "init".to_string();
    for (k, delta) in rows {
        let node = table
            .iter()
            .find(|r| r[0] == k.to_string() && r[1] == age)
            .unwrap_or_else(|| panic!("missing node {k}/{age}"));
        assert_eq!(node[5] == "1", delta, "k={k}");
        age = match (delta, age.as_str()) {
            (true, _) => "1".into(),
            (false, "init") => "init".into(),
            (false, tau) => (tau.parse::<usize>().unwrap() + 1).to_string(),
        };
    }
}

#[test]
fn poa_file_has_three_columns() {
    let dir = TempDir::new().unwrap();
    assert!(run_in(dir.path(), "poa", "paper_sim.json", &[])
        .status
        .success());
    let text = read(dir.path(), "values.csv");
    assert_eq!(text.lines().next().unwrap(), "k,age,poa");
    // 1 + 2 + ... + 16 nodes
    assert_eq!(text.lines().count(), 1 + 136);
}

#[test]
fn exit_codes() {
    assert_eq!(switchgame(&[]).status.code(), Some(1));
    assert_eq!(switchgame(&["--help"]).status.code(), Some(0));
    assert_eq!(
        switchgame(&["bogus", "--config", "x.json"]).status.code(),
        Some(1)
    );

    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), "simulate", "scalar.json", &["--runs", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let missing = switchgame(&["values", "--config", "/nonexistent/game.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(example("scalar.json"))
        .unwrap()
        .replace("\"lambda1\": 1.0", "\"lambda1\": -1.0");
    std::fs::write(&bad, text).unwrap();
    let out = switchgame(&[
        "values",
        "--config",
        bad.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(!dir.path().join("values.csv").exists());
}
