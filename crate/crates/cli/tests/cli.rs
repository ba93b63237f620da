use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const MINIMAL: &str = r#"{"m": 16, "alpha": 2.0, "spec1": "17:17,3", "noise": "wedge",
    "trials": 2, "slots_per_trial": 1000, "master_seed": 42}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_y00lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn feasibility_matches_entropy_oracle() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["feasibility", "--key-bits", "100", "--p", "0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let field = |name: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{name} ")))
            .unwrap_or_else(|| panic!("no {name} in {out}"))
            .parse()
            .unwrap()
    };
    let h = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
    assert!((field("capacity") - (1.0 - h)).abs() < 1e-12);
    assert!((field("capacity") - 0.1887).abs() < 1e-4);
    assert!((field("n0") - 100.0 / (1.0 - h)).abs() < 1e-9);
    assert_eq!(field("n0").round(), 530.0);
}

#[test]
fn keystream_repeats_with_period_fifteen() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &["keystream", "--spec", "4:4,1", "--seed", "1", "--n", "30"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let hex = stdout(&o).trim().to_string();
    let bits: Vec<u8> = hex
        .chars()
        .flat_map(|c| {
            let v = c.to_digit(16).unwrap();
            (0..4).rev().map(move |b| ((v >> b) & 1) as u8)
        })
        .take(30)
        .collect();
    let mut oracle = vec![1u8, 0, 0, 0];
    while oracle.len() < 30 {
        let t = oracle.len();
        oracle.push(oracle[t - 4] ^ oracle[t - 1]);
    }
    assert_eq!(bits, oracle);
    assert_eq!(bits[..15], bits[15..]);
    assert_eq!(hex.len(), 8);
}

#[test]
fn experiment_output_is_deterministic_and_self_describing() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("cfg.json"), MINIMAL).unwrap();
    for format in ["csv", "json"] {
        let mut outputs = Vec::new();
        for name in ["a", "b"] {
            let out = format!("{name}.{format}");
            let o = run(
                dir.path(),
                &[
                    "experiment",
                    "--config",
                    "cfg.json",
                    "--set",
                    "spec2=20:20,3",
                    "--output",
                    &out,
                    "--format",
                    format,
                ],
            );
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            assert!(o.stdout.is_empty());
            outputs.push(fs::read(dir.path().join(&out)).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
        let text = String::from_utf8(outputs[0].clone()).unwrap();
        assert!(text.contains("master_seed"));
        assert!(text.contains(env!("CARGO_PKG_VERSION")));
        assert!(text.contains("20:20,3"));
    }
    assert_eq!(
        entries(dir.path()),
        ["a.csv", "a.json", "b.csv", "b.json", "cfg.json"]
    );
}

#[test]
fn simulate_and_attack_write_only_their_output() {
    let dir = TempDir::new().unwrap();
    let attack_cfg = r#"{"m": 2, "alpha": 1.5, "spec1": "11:11,2", "noise": "gaussian", "attack": "ml",
        "trials": 1, "slots_per_trial": 300, "master_seed": 3}"#;
    fs::write(dir.path().join("cfg.json"), attack_cfg).unwrap();
    let o = run(
        dir.path(),
        &["simulate", "--config", "cfg.json", "--output", "slots.csv"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = fs::read_to_string(dir.path().join("slots.csv")).unwrap();
    assert!(trace.contains("index,data_bit,running_key,pattern_index,true_phase,measured_phase"));
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 301);

    let o = run(
        dir.path(),
        &[
            "attack",
            "--config",
            "cfg.json",
            "--format",
            "json",
            "--output",
            "attack.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("attack.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["method"], "ML");
    assert_eq!(report["report"]["success"], true);
    assert_eq!(report["provenance"]["master_seed"], 3);
    assert_eq!(entries(dir.path()), ["attack.json", "cfg.json", "slots.csv"]);
}

#[test]
fn exit_statuses() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["frobnicate", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("frobnicate"));
    assert!(!stderr(&o).contains("missing.json"));

    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(
        run(dir.path(), &["feasibility", "--key-bits", "10"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(dir.path(), &["feasibility", "--key-bits", "10", "--p", "0.7"])
            .status
            .code(),
        Some(1)
    );

    fs::write(dir.path().join("cfg.json"), MINIMAL).unwrap();
    let refused = run(
        dir.path(),
        &[
            "attack",
            "--config",
            "cfg.json",
            "--set",
            "attack=ml",
            "--set",
            "spec1=31:31,3",
        ],
    );
    assert_eq!(refused.status.code(), Some(2), "{}", stderr(&refused));
    assert!(stderr(&refused).contains("refused"));
    assert!(refused.stdout.is_empty());
    assert_eq!(entries(dir.path()), ["cfg.json"]);
}

#[test]
fn validation_messages() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.json"), MINIMAL.replace("16", "3")).unwrap();
    let o = run(
        dir.path(),
        &["experiment", "--config", "bad.json", "--set", "nope=1"],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("M must be a power of two"), "{err}");
    assert!(err.contains("nope"), "{err}");

    fs::write(
        dir.path().join("broken.json"),
        "{\n  \"m\": 16,\n  \"alpha\" 2.0\n}",
    )
    .unwrap();
    let o = run(dir.path(), &["experiment", "--config", "broken.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(dir.path().join("cfg.json"), MINIMAL).unwrap();
    let o = run(
        dir.path(),
        &[
            "experiment",
            "--config",
            "cfg.json",
            "--set",
            "alpha=40",
            "--set",
            "spec2=20:20,3",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
}
