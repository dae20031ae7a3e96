use std::path::Path;
use std::process::{Command, Output};

fn islab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_islab")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn passing_preset_exits_zero() {
    let o = islab(&["report", "--preset", "aligned"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["summary"]["all_pass"], true);
}

#[test]
fn failing_theorem_check_exits_two() {
    let o = islab(&["check", "thm1", "--preset", "thm1-fail"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("thm1: fail"), "{}", stdout(&o));
}

#[test]
fn invalid_scenario_exits_three_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"name": "bad", "model": "is", "params": {"chi": 1.0, "gamma": 0.0, "k": 1.0},
            "kernel": {"kind": "constant", "value": 1.0},
            "initial": {"kind": "explicit", "x": [[0,0,0]], "v": [[1,0,0]]}}"#,
    );
    let o = islab(&["simulate", "--scenario", &bad]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.gamma"), "{err}");
    let o = islab(&["simulate", "--scenario", &dir.path().join("missing.json").to_string_lossy()]);
    assert_eq!(code(&o), 3);
    let o = islab(&["simulate", "--preset", "no-such-preset"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn divergence_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let wild = write(
        dir.path(),
        "wild.json",
        r#"{"name": "wild", "model": "is", "params": {"chi": 1e-300, "gamma": 1.0, "k": 1e300},
            "kernel": {"kind": "constant", "value": 1.0},
            "initial": {"kind": "explicit", "x": [[0,0,0],[1,0,0]], "v": [[1,0,0],[0,1,0]]},
            "integrator": {"dt": 1.0, "t_end": 100.0, "sample_every": 1}}"#,
    );
    let o = islab(&["simulate", "--scenario", &wild]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_series_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = islab(&["simulate", "--preset", "thm1-pass", "--t-end", "1", "--out", &out.to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("t,Dx,Dv"));
    // 1 / (0.005 · 10) = 20 intervals
    assert_eq!(csv.lines().count(), 22);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "thm1-pass");
}

#[test]
fn gronwall_subcommands() {
    let o = islab(&["gronwall", "eval", "--a", "1", "--b", "3", "--c", "2", "--y0", "1", "--times", "0,1"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let b1 = v["bounds"][1]["bound"].as_f64().unwrap();
    assert!((b1 - (2.0 * (-1.0f64).exp() - (-2.0f64).exp())).abs() < 1e-12);

    let o = islab(&["gronwall", "oracle", "--a", "2", "--b", "1", "--c", "0.25", "--nu", "1", "--y0", "1", "--t-end", "2"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "t,y,bound");
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cols[1] <= cols[2] + 1e-8, "{line}");
    }

    let o = islab(&["gronwall", "suite", "--count", "5", "--t-end", "10"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn sweep_prints_aggregate_table() {
    let o = islab(&["sweep", "--preset", "thm1-pass", "--axis", "gamma", "--values", "1.9,2.1", "--t-end", "5"]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3, "{text}");
    assert!(rows[0].starts_with("value,exit_code"));
    let header: Vec<&str> = rows[0].split(',').collect();
    let case = header.iter().position(|h| *h == "thm1.case").unwrap();
    // string cells are quoted; the "ii, ..." tags contain a comma
    assert!(rows[1].contains("\"ii, Ddot"), "{text}");
    assert_eq!(rows[2].split(',').nth(case).unwrap(), "\"i\"");

    let empty = islab(&["sweep", "--preset", "aligned", "--axis", "chi", "--values", ""]);
    assert_eq!(code(&empty), 0);
    assert_eq!(stdout(&empty), "value,exit_code\n");

    let bad = islab(&["sweep", "--preset", "aligned", "--axis", "colour", "--values", "1"]);
    assert_eq!(code(&bad), 3);
}

#[test]
fn presets_can_be_saved_and_rerun() {
    let o = islab(&["presets"]);
    assert!(stdout(&o).lines().any(|l| l == "thm2-pass"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t2.json");
    let o = islab(&["presets", "--name", "thm2-pass", "--save", &path.to_string_lossy()]);
    assert_eq!(code(&o), 0);
    let o = islab(&["check", "thm2", "--scenario", &path.to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn reductions_run_from_presets() {
    assert_eq!(code(&islab(&["reduce", "kuramoto", "--preset", "kuramoto-chy"])), 0);
    assert_eq!(code(&islab(&["reduce", "cs", "--preset", "chi-limit"])), 0);
    assert_eq!(code(&islab(&["check", "cs-flock", "--preset", "cs-flock"])), 0);
    assert_eq!(code(&islab(&["check", "chy", "--preset", "kuramoto-chy"])), 0);
    assert_eq!(code(&islab(&["check", "ha", "--preset", "ha-pass"])), 0);
}

#[test]
fn usage_errors_exit_three() {
    assert_eq!(code(&islab(&["sweep", "--preset", "aligned", "--axis", "chi", "--values", "x"])), 3);
    assert_eq!(code(&islab(&["no-such-command"])), 3);
    assert_eq!(code(&islab(&["--help"])), 0);
}
