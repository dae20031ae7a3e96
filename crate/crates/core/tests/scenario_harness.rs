use islab::harness::{run, sweep, with_axis, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_PASS};
use islab::scenario::{load_scenario, preset, preset_names, save_scenario, CheckId, Scenario};
use islab::theorems::Status;
use islab::Error;

#[test]
fn every_preset_passes_its_declared_checks() {
    for name in preset_names() {
        let sc = preset(name).unwrap();
        let r = run(&sc, None).unwrap();
        assert_eq!(r.exit_code, EXIT_PASS, "{name}: {:?}", r.summary.failing);
        assert_eq!(r.summary.passed, sc.checks.len(), "{name}");
    }
}

#[test]
fn saved_scenario_loads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("thm2.json");
    let sc = preset("thm2-pass").unwrap();
    save_scenario(&sc, &path).unwrap();
    let back = load_scenario(&path).unwrap();
    assert_eq!(back, sc);
    assert_eq!(back.digest().unwrap(), sc.digest().unwrap());
    let (a, b) = (run(&sc, None).unwrap(), run(&back, None).unwrap());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn output_directories_are_byte_identical() {
    for name in ["thm1-pass", "kuramoto-chy", "gronwall-suite"] {
        let sc = preset(name).unwrap();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let r = run(&sc, Some(d1.path())).unwrap();
        run(&sc, Some(d2.path())).unwrap();
        let mut files = r.series.clone();
        files.push("report.json".into());
        for f in files {
            let a = std::fs::read(d1.path().join(&f)).unwrap();
            let b = std::fs::read(d2.path().join(&f)).unwrap();
            assert!(!a.is_empty(), "{name}/{f}");
            assert_eq!(a, b, "{name}/{f}");
        }
    }
}

#[test]
fn diagnostics_series_has_header_and_one_row_per_sample() {
    let sc = preset("aligned").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = run(&sc, Some(dir.path())).unwrap();
    assert!(r.series.contains(&"diagnostics.csv".to_string()));
    let text = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,Dx,Dv,Ds,A,E,S,lyap,sc_norm,Dv_dot,speed_drift,sv_drift");
    let steps = (sc.integrator.t_end / sc.integrator.dt).round() as usize / sc.integrator.sample_every;
    assert_eq!(lines.count(), steps + 1);
}

#[test]
fn thm1_report_carries_constant_case_and_invariance() {
    let r = run(&preset("thm1-pass").unwrap(), None).unwrap();
    let c = r.check(CheckId::Thm1).unwrap();
    assert_eq!(c.status, Status::Pass);
    let c0 = c.metrics["C0"];
    assert!(c0 > 0.0 && c0 < 0.5);
    assert!(c.metrics["min_A"] > 0.5);
    assert!(c.metrics["D(v(t_end))"] < c.metrics["D(v0)"] / 100.0);
    let thm = &r.theorems["thm1"];
    assert_eq!(thm["case"], "i");
    assert_eq!(r.check(CheckId::Invariance).unwrap().status, Status::Pass);
}

#[test]
fn thm1_fail_preset_fails_the_theorem_check() {
    let mut sc = preset("thm1-fail").unwrap();
    sc.checks = vec![CheckId::Thm1];
    let r = run(&sc, None).unwrap();
    assert_eq!(r.exit_code, EXIT_CHECK_FAILED);
    assert!(r.check(CheckId::Thm1).unwrap().metrics["C0"] > 1.0);
}

#[test]
fn gronwall_suite_table_is_reported() {
    let r = run(&preset("gronwall-suite").unwrap(), None).unwrap();
    let c = r.check(CheckId::GronwallSuite).unwrap();
    assert_eq!(c.status, Status::Pass);
    let suite = &r.tables["gronwall_suite"];
    assert_eq!(suite["rows"].as_array().unwrap().len(), 100);
    assert!(suite["closed_form_error"].as_f64().unwrap() <= 1e-10);
    assert!(suite["mu_star_error"].as_f64().unwrap().abs() <= 1e-9);
    assert!(suite["vanishing_tail"].as_f64().unwrap() < 1e-6);
}

#[test]
fn damping_sweep_flips_the_thm1_case_at_the_threshold() {
    let sc = preset("thm1-pass").unwrap();
    // threshold √(8kχψ_mδ₀) = 2 for these parameters
    let rep = sweep(&sc, "gamma", &[1.9, 2.1, 3.0], None).unwrap();
    let tags: Vec<String> = rep
        .runs
        .iter()
        .map(|r| r.report.as_ref().unwrap().theorems["thm1"]["case"].as_str().unwrap().to_string())
        .collect();
    assert!(tags[0].starts_with("ii"));
    assert_eq!(tags[1], "i");
    assert_eq!(tags[2], "i");
    let csv = rep.aggregate_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().next().unwrap().starts_with("value,exit_code"));
}

#[test]
fn chi_sweep_reduces_the_cs_deviation() {
    let sc = preset("chi-limit").unwrap();
    let rep = sweep(&sc, "chi", &[0.1, 0.05, 0.025], None).unwrap();
    let dev: Vec<f64> = rep
        .runs
        .iter()
        .map(|r| r.report.as_ref().unwrap().check(CheckId::ChiLimit).unwrap().metrics["deviation_largest_chi"])
        .collect();
    assert!(dev[0] > dev[1] && dev[1] > dev[2], "{dev:?}");
}

#[test]
fn invalid_values_are_isolated_per_run() {
    let sc = preset("aligned").unwrap();
    let rep = sweep(&sc, "chi", &[1.0, 0.0], None).unwrap();
    assert_eq!(rep.runs[0].exit_code, EXIT_PASS);
    assert_eq!(rep.runs[1].exit_code, EXIT_INVALID);
    assert!(rep.runs[1].error.is_some());
    assert_ne!(rep.exit_code, EXIT_PASS);
}

#[test]
fn seed_axis_changes_generated_states_only() {
    let sc = preset("thm1-pass").unwrap();
    let a = with_axis(&sc, "seed", 11.0).unwrap();
    let b = with_axis(&sc, "seed", 12.0).unwrap();
    assert_eq!(a.swarm_state().unwrap(), sc.swarm_state().unwrap());
    assert_ne!(b.swarm_state().unwrap(), sc.swarm_state().unwrap());
    assert_eq!(b.params, sc.params);
}

#[test]
fn malformed_files_name_the_offending_field() {
    let text = r#"{"name": "x", "model": "is", "params": {"chi": "one", "gamma": 1, "k": 1}, "checks": []}"#;
    match Scenario::from_json(text) {
        Err(Error::Scenario { path, .. }) => assert_eq!(path, "params.chi"),
        other => panic!("{other:?}"),
    }
}
