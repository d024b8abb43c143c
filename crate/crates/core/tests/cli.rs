use std::path::PathBuf;
use std::process::{Command, Output};

use anderson1d::cli::RunManifest;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anderson1d")).args(args).output().expect("binary runs")
}

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn free_model_has_one_band() {
    let o = bin(&["bands", "--model", &model("free.json"), "--min", "0", "--max", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("band_index,kind,left,right"));
    assert_eq!(rows(&out), vec![vec!["0", "band", "0", "50"]]);
}

#[test]
fn closed_gaps_can_be_listed() {
    let o = bin(&["bands", "--model", &model("free.json"), "--min", "0", "--max", "50", "--closed-gaps"]);
    let r = rows(&stdout(&o));
    let closed: Vec<f64> = r.iter().filter(|r| r[1] == "gap").map(|r| r[2].parse().unwrap()).collect();
    let pi2 = std::f64::consts::PI.powi(2);
    assert_eq!(closed.len(), 2);
    assert!((closed[0] - pi2).abs() < 1e-6 && (closed[1] - 4.0 * pi2).abs() < 1e-6);
}

#[test]
fn missing_model_is_a_validation_error() {
    let o = bin(&["bands", "--model", "/nonexistent/model.json", "--min", "0", "--max", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("/nonexistent/model.json"), "{err}");
    assert!(err.contains("Io"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bin(&["bands", "--min", "0"]).status.code(), Some(1));
    assert_eq!(bin(&["--version"]).status.code(), Some(0));
}

#[test]
fn numeric_errors_exit_two() {
    // 9.8696044 is within the edge tolerance of π².
    let o = bin(&["scatter", "--model", &model("squarewell.json"), "--lambda-list", "9.8696044"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("TooCloseToEdge"));
}

#[test]
fn square_well_b_roots() {
    let o = bin(&["critical", "--model", &model("squarewell.json"), "--min", "0", "--max", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let roots: Vec<f64> = rows(&stdout(&o)).iter().filter(|r| r[1] == "b_root").map(|r| r[0].parse().unwrap()).collect();
    let pi2 = std::f64::consts::PI.powi(2);
    assert_eq!(roots.len(), 2);
    assert!((roots[0] - (pi2 + 1.0)).abs() < 1e-6);
    assert!((roots[1] - (4.0 * pi2 + 1.0)).abs() < 1e-6);
}

#[test]
fn scatter_marks_regions() {
    let o = bin(&["scatter", "--model", &model("kronig_penney.json"), "--lambda-list", "1,5"]);
    let r = rows(&stdout(&o));
    assert_eq!(r[0][1], "gap");
    assert!(r[0][2].is_empty() && !r[0][6].is_empty());
    assert_eq!(r[1][1], "band");
    assert!(!r[1][2].is_empty() && r[1][6].is_empty());
}

#[test]
fn runs_are_reproducible_and_documented() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = bin(&[
            "lyapunov",
            "--model",
            &model("squarewell.json"),
            "--lambda-min",
            "0.5",
            "--lambda-max",
            "3",
            "--lambda-step",
            "0.5",
            "--steps",
            "500",
            "--samples",
            "8",
            "--seed",
            "17",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let csv = std::fs::read_to_string(&out).unwrap();
        let manifest: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{name}.manifest.json"))).unwrap())
                .unwrap();
        (csv, manifest)
    };
    let (a, ma) = run("a.csv");
    let (b, mb) = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(rows(&a).len(), 6);
    assert_eq!(ma.subcommand, "lyapunov");
    assert_eq!(ma.master_seed, 17);
    assert_eq!(ma.parameters, mb.parameters);
    assert_eq!(ma.parameters["steps"], serde_json::json!(500));
    assert_eq!(ma.tool_version, env!("CARGO_PKG_VERSION"));
    let started = chrono::DateTime::parse_from_rfc3339(&ma.started).unwrap();
    let finished = chrono::DateTime::parse_from_rfc3339(&ma.finished).unwrap();
    assert!(started <= finished);
}

#[test]
fn explicit_manifest_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let o = bin(&[
        "green",
        "--model",
        &model("squarewell.json"),
        "--length",
        "21",
        "--lambda",
        "-1",
        "--x",
        "-1,0",
        "--y",
        "3",
        "--manifest",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(rows(&stdout(&o)).len(), 2);
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(m.subcommand, "green");
    assert_eq!(m.parameters["x"], serde_json::json!([-1.0, 0.0]));
}

#[test]
fn selftest_is_deterministic() {
    let a = bin(&["selftest", "--only", "1,3"]);
    let b = bin(&["selftest", "--only", "1,3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 3);
}

#[test]
fn selftest_tolerance_hook_forces_failure() {
    // Criterion 3 sits near 1e-15 against a 1e-8 bound; scaling by 1e-10 must fail it.
    let o = bin(&["selftest", "--only", "3", "--tolerance-scale", "1e-10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"), "{}", stdout(&o));
}

#[test]
fn selftest_rejects_unknown_criteria() {
    assert_eq!(bin(&["selftest", "--only", "11"]).status.code(), Some(1));
}
