use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const CESARO_01: &str = r#"{"family": "CesaroType", "alpha": 0, "delta": 1}"#;
const CESARO_25: &str = r#"{"family": "CesaroType", "alpha": 2.5, "delta": 0.4}"#;

struct Run {
    code: i32,
    out: PathBuf,
    stdout: String,
    stderr: String,
}

fn nqlab(
    dir: &Path,
    tag: &str,
    command: &str,
    config: &str,
    extra: &[&str],
    threads: Option<&str>,
) -> Run {
    let cfg = dir.join(format!("{tag}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(tag);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nqlab"));
    cmd.arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra);
    match threads {
        Some(t) => cmd.env("NQLAB_THREADS", t),
        None => cmd.env_remove("NQLAB_THREADS"),
    };
    let o = cmd.output().unwrap();
    Run {
        code: o.status.code().unwrap(),
        out,
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

fn manifest(run: &Run) -> Value {
    serde_json::from_str(&fs::read_to_string(run.out.join("manifest.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn kernel_check_writes_seven_conditions() {
    let tmp = tempfile::tempdir().unwrap();
    let run = nqlab(
        tmp.path(),
        "kc",
        "kernel-check",
        &format!(r#"{{"kernel": {CESARO_01}}}"#),
        &[],
        None,
    );
    assert_eq!(run.code, 0, "{}{}", run.stdout, run.stderr);
    let rows = read_csv(&run.out.join("conditions.csv"));
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| &r[1] == "true"));
    let m = manifest(&run);
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config"]["command"], "kernel-check");
    assert_eq!(m["checks"].as_array().unwrap().len(), 8);
}

#[test]
fn abs_diagnostic_runs_without_expectation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"kernel": {CESARO_01}, "series": {{"name": "alternating"}}, "schedule": {{"a": 1, "w_max": 4096}}}}"#
    );
    let run = nqlab(tmp.path(), "ad", "abs-diagnostic", &cfg, &[], None);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let rows = read_csv(&run.out.join("increments.csv"));
    let summary = rows.last().unwrap();
    assert_eq!(&summary[0], "summary");
    assert!(["ConvergentEvidence", "DivergentEvidence", "Inconclusive"].contains(&&summary[8]));
    // Partial integrals are running sums of the increments.
    let mut acc = 0.0;
    for r in &rows[..rows.len() - 1] {
        acc += r[5].parse::<f64>().unwrap();
        assert!((r[4].parse::<f64>().unwrap() - acc).abs() <= 1e-12 * acc.max(1.0));
    }
}

#[test]
fn representation_lattice_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"kernel": {CESARO_25}, "estimate": {{"check": "kernel-sum-representation"}}}}"#
    );
    let run = nqlab(tmp.path(), "rep", "lemma-verify", &cfg, &[], None);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let rows = read_csv(&run.out.join("kernel_sum_representation.csv"));
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() <= 1e-6));
}

#[test]
fn failed_check_exits_one_and_manifest_agrees() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"kernel": {CESARO_01}, "series": {{"name": "alternating"}},
            "schedule": {{"w_values": [10, 100]}}, "expected": {{"sum": 0.75}}}}"#
    );
    let run = nqlab(tmp.path(), "mean", "mean", &cfg, &[], None);
    assert_eq!(run.code, 1);
    let m = manifest(&run);
    assert_eq!(m["status"], "check_failed");
    assert_eq!(m["checks"][0]["pass"], false);
    let rows = read_csv(&run.out.join("means.csv"));
    assert!((rows[1][2].parse::<f64>().unwrap() - 0.25).abs() < 1e-12);

    let run = nqlab(
        tmp.path(),
        "mean-ok",
        "mean",
        &cfg,
        &["--tolerance", "0.3"],
        None,
    );
    assert_eq!(run.code, 0);
}

#[test]
fn invalid_configs_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_alpha = r#"{"kernel": {"family": "CesaroType", "alpha": -1, "delta": 1}}"#;
    let run = nqlab(tmp.path(), "alpha", "kernel-check", bad_alpha, &[], None);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("alpha must be ≥ 0"), "{}", run.stderr);
    assert_eq!(manifest(&run)["status"], "config_invalid");

    let high_r = r#"{"kernel": {"family": "CesaroType", "alpha": 2, "delta": 0.5},
                     "function": {"name": "cos"}, "fourier": {"x": 0.0, "r": 3}}"#;
    let run = nqlab(tmp.path(), "r", "fourier-experiment", high_r, &[], None);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("requires r < alpha"), "{}", run.stderr);

    let unknown = format!(
        r#"{{"kernel": {CESARO_25}, "function": {{"name": "zigzag"}}, "fourier": {{"x": 0, "r": 1}}}}"#
    );
    let run = nqlab(tmp.path(), "fn", "fourier-experiment", &unknown, &[], None);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("zigzag"), "{}", run.stderr);

    let run = nqlab(tmp.path(), "json", "kernel-check", "{not json", &[], None);
    assert_eq!(run.code, 2);

    let other = format!(r#"{{"command": "mean", "kernel": {CESARO_01}}}"#);
    let run = nqlab(tmp.path(), "mismatch", "kernel-check", &other, &[], None);
    assert_eq!(run.code, 2);

    let run = nqlab(
        tmp.path(),
        "threads",
        "kernel-check",
        &format!(r#"{{"kernel": {CESARO_01}}}"#),
        &[],
        Some("zero"),
    );
    assert_eq!(run.code, 2);
}

#[test]
fn numerical_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"kernel": {CESARO_01}, "series": {{"name": "alternating"}},
            "schedule": {{"a": 1, "w_max": 4096, "budget": 1000}}}}"#
    );
    let run = nqlab(tmp.path(), "budget", "abs-diagnostic", &cfg, &[], None);
    assert_eq!(run.code, 3);
    let m = manifest(&run);
    assert_eq!(m["status"], "numerical_failure");
    assert!(m["error"].as_str().unwrap().contains("budget"), "{m}");
}

#[test]
fn fourier_experiment_reports_split_and_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"kernel": {CESARO_25}, "function": {{"name": "trig", "a": [0, 1, 0.5], "b": [0.3, -0.2]}},
            "fourier": {{"x": 0.7, "r": 2, "order": 8, "quad_nodes": 64}},
            "expected": {{"hypothesis_verdict": "Holds"}}}}"#
    );
    let run = nqlab(tmp.path(), "fx", "fourier-experiment", &cfg, &[], None);
    assert_eq!(run.code, 0, "{}{}", run.stdout, run.stderr);
    let split = read_csv(&run.out.join("split.csv"));
    assert_eq!(split.len(), 8);
    assert!(split.iter().all(|r| &r[8] == "true"));
    let hyp = read_csv(&run.out.join("hypotheses.csv"));
    assert_eq!(&hyp[0][5], "Holds");
}

#[test]
fn seeded_runs_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"estimate": {"check": "oscillatory-sum",
                  "sum_grid": {"x_values": [8, 16, 32, 64, 128], "u_values": [0.01, 0.03, 0.1, 0.25],
                               "max_i": 1, "max_j": 1, "x_max": 512, "x_slice_points": 40}},
                  "jitter": 0.01}"#;
    let a = nqlab(
        tmp.path(),
        "a",
        "lemma-verify",
        cfg,
        &["--seed", "9"],
        Some("1"),
    );
    let b = nqlab(
        tmp.path(),
        "b",
        "lemma-verify",
        cfg,
        &["--seed", "9"],
        Some("4"),
    );
    let c = nqlab(
        tmp.path(),
        "c",
        "lemma-verify",
        cfg,
        &["--seed", "10"],
        None,
    );
    let files = |r: &Run| {
        let mut v: Vec<_> = fs::read_dir(&r.out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .map(|p| (p.file_name().unwrap().to_owned(), fs::read(&p).unwrap()))
            .collect();
        v.sort();
        v
    };
    assert!(a.code == 0 || a.code == 1);
    assert_eq!(files(&a), files(&b));
    assert_ne!(files(&a), files(&c));
    assert_eq!(manifest(&a)["config"]["seed"], 9);
}
