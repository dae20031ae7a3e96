//! Scenario runner: simulates, writes series CSVs, evaluates the requested checks and assembles
//! a JSON report; plus one-parameter sweeps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    dissipation_audit, energy_functionals, fmt_sig17, inequality_audit, s_integral_audit,
    trajectory_records, DiagnosticsRecord, FD_BUDGET_FLOOR,
};
use crate::error::{Error, Result};
use crate::gronwall::{
    domination_suite, gron1_bound, gron1_oracle, gron2_bound, gron2_oracle, OracleOptions,
    DOMINATION_TOL,
};
use crate::integrator::{simulate, Trajectory};
use crate::model::CommunicationKernel;
use crate::reductions::cs::{flock_audit, sddi_audit};
use crate::reductions::kuramoto::{unwrap_phases, KuramotoTrajectory};
use crate::reductions::{
    chi_limit_study, chy_condition, cs_flocking_check, cs_simulate, embed_planar,
    kuramoto_simulate, ChiLimitTable, CSTrajectory,
};
use crate::scenario::{CheckId, InitialSpec, ModelKind, Scenario, StudySpec};
use crate::theorems::{
    ha_conclusions, ha_multiplicative_check, thm1_check, thm1_conclusions, thm2_check,
    thm2_conclusions, verify_invariance, Status, TheoremReport,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

/// Exit status for an error raised while running a scenario.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } | Error::NonFinite(_) => EXIT_DIVERGENCE,
        Error::Scenario { .. } | Error::InvalidParameter(_) | Error::KernelContract(_) => EXIT_INVALID,
        _ => EXIT_CHECK_FAILED,
    }
}

pub const SPEED_TOL: f64 = 1e-8;
pub const SV_TOL: f64 = 1e-8;
pub const SPIN_CENTER_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub status: Status,
    pub metrics: BTreeMap<String, f64>,
    pub detail: String,
}

impl CheckOutcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        CheckOutcome {
            status: if pass { Status::Pass } else { Status::Fail },
            metrics: BTreeMap::new(),
            detail: detail.into(),
        }
    }

    fn failed(e: &Error) -> Self {
        CheckOutcome::new(false, e.to_string())
    }

    fn metric(mut self, name: &str, v: f64) -> Self {
        self.metrics.insert(name.into(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    pub failing: Vec<String>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub model: ModelKind,
    pub digest: String,
    /// Series files written next to the report, relative to the output directory.
    pub series: Vec<String>,
    pub checks: BTreeMap<String, CheckOutcome>,
    pub theorems: BTreeMap<String, serde_json::Value>,
    pub tables: BTreeMap<String, serde_json::Value>,
    pub summary: Summary,
    pub exit_code: i32,
}

impl RunReport {
    pub fn check(&self, id: CheckId) -> Option<&CheckOutcome> {
        self.checks.get(id.name())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

struct Collector {
    out: Option<PathBuf>,
    series: Vec<String>,
    checks: BTreeMap<String, CheckOutcome>,
    theorems: BTreeMap<String, serde_json::Value>,
    tables: BTreeMap<String, serde_json::Value>,
}

impl Collector {
    fn write(&mut self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        if let Some(dir) = &self.out {
            let mut text = String::with_capacity(rows.len() * 200);
            text.push_str(header);
            text.push('\n');
            for r in rows {
                text.push_str(r);
                text.push('\n');
            }
            std::fs::write(dir.join(name), text)?;
            self.series.push(name.into());
        }
        Ok(())
    }

    fn put(&mut self, id: CheckId, outcome: CheckOutcome) {
        self.checks.insert(id.name().into(), outcome);
    }

    fn theorem(&mut self, id: CheckId, r: &TheoremReport) -> Result<CheckOutcome> {
        self.theorems.insert(id.name().into(), serde_json::to_value(r)?);
        let mut o = CheckOutcome {
            status: r.status(),
            metrics: r.constants.iter().map(|(k, c)| (k.clone(), c.value)).collect(),
            detail: String::new(),
        };
        let failing: Vec<String> = r
            .conditions
            .iter()
            .filter(|c| !c.holds)
            .map(|c| format!("condition {} fails ({} vs {})", c.name, c.lhs, c.rhs))
            .chain(
                r.conclusions
                    .iter()
                    .filter(|c| c.status != Status::Pass)
                    .map(|c| format!("{}: {}", c.name, c.detail)),
            )
            .collect();
        o.detail = if failing.is_empty() {
            format!("case {}", r.case.as_deref().unwrap_or("-"))
        } else {
            failing.join("; ")
        };
        Ok(o)
    }
}

/// Runs every check of `sc`; writes `report.json` and the series CSVs into `out` when given.
///
/// Numerical divergence aborts the run with an error; a failing or inapplicable check is recorded
/// in the report.
pub fn run(sc: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    sc.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut col = Collector {
        out: out.map(Path::to_path_buf),
        series: Vec::new(),
        checks: BTreeMap::new(),
        theorems: BTreeMap::new(),
        tables: BTreeMap::new(),
    };
    match sc.model {
        ModelKind::Is => run_is(sc, &mut col)?,
        ModelKind::Kuramoto => run_kuramoto(sc, &mut col)?,
        ModelKind::Cs => run_cs(sc, &mut col)?,
        ModelKind::Gronwall => run_gronwall(sc, &mut col)?,
    }
    let mut summary = Summary { passed: 0, failed: 0, inconclusive: 0, failing: Vec::new(), all_pass: true };
    for (name, c) in &col.checks {
        match c.status {
            Status::Pass => summary.passed += 1,
            Status::Fail => summary.failed += 1,
            Status::Inconclusive => summary.inconclusive += 1,
        }
        if c.status != Status::Pass {
            summary.failing.push(name.clone());
        }
    }
    summary.all_pass = summary.failing.is_empty();
    let report = RunReport {
        scenario: sc.name.clone(),
        model: sc.model,
        digest: sc.digest()?,
        series: col.series,
        checks: col.checks,
        theorems: col.theorems,
        tables: col.tables,
        exit_code: if summary.all_pass { EXIT_PASS } else { EXIT_CHECK_FAILED },
        summary,
    };
    if let Some(dir) = out {
        std::fs::write(dir.join("report.json"), report.to_json()?)?;
    }
    Ok(report)
}

fn run_is(sc: &Scenario, col: &mut Collector) -> Result<()> {
    let params = sc.model_params()?;
    let state0 = sc.swarm_state()?;
    let kernel = sc.swarm_kernel(state0.len())?;
    let traj = simulate(&params, &kernel, &state0, &sc.integrator, &mut [])?;
    let records = trajectory_records(&traj, &kernel, &params)?;
    let rows: Vec<String> = records.iter().map(DiagnosticsRecord::csv_row).collect();
    col.write("diagnostics.csv", DiagnosticsRecord::CSV_HEADER, &rows)?;
    let en0 = energy_functionals(&state0, &kernel, &params)?;
    for &id in &sc.checks {
        let o = match id {
            CheckId::Conservation => conservation(&traj, &records, &params),
            CheckId::Dissipation => dissipation(&traj, &kernel, &params).unwrap_or_else(|e| CheckOutcome::failed(&e)),
            CheckId::SIntegral => match s_integral_audit(&traj, &kernel, &params, en0.e, en0.s) {
                Ok(a) => CheckOutcome::new(a.pass, format!("bound {} against peak cumulative", a.bound))
                    .metric("bound", a.bound)
                    .metric("margin", a.margin)
                    .metric("quadrature_error", a.quadrature_error),
                Err(e) => CheckOutcome::failed(&e),
            },
            CheckId::Inequality => match inequality_audit(&traj, &kernel, &params, sc.delta0) {
                Ok(a) => {
                    let mut o = CheckOutcome::new(
                        a.passed(),
                        format!("{} samples audited, {} skipped, worst at t = {}", a.audited, a.skipped, a.worst_time),
                    )
                    .metric("bas1_margin", a.bas1_margin)
                    .metric("bas2_margin", a.bas2_margin)
                    .metric("budget", a.budget)
                    .metric("c_fd", a.c_fd);
                    if let Some(m) = a.bas1_delta0_margin {
                        o = o.metric("bas1_delta0_margin", m);
                    }
                    if let Some(m) = a.bas2_delta0_margin {
                        o = o.metric("bas2_delta0_margin", m);
                    }
                    o
                }
                Err(e) => CheckOutcome::failed(&e),
            },
            CheckId::Invariance => {
                let d0 = sc.delta0.expect("validated");
                match verify_invariance(&traj, d0) {
                    Ok(inv) => CheckOutcome::new(
                        inv.held,
                        match inv.first_violation {
                            None => format!("A(v(t)) > {d0} at every sample"),
                            Some(t) => format!("A(v) <= {d0} first at t = {t}"),
                        },
                    )
                    .metric("min_A", inv.min_a),
                    Err(e) => CheckOutcome::failed(&e),
                }
            }
            CheckId::Thm1 => {
                let d0 = sc.delta0.expect("validated");
                let r = thm1_check(&state0, &params, &kernel, d0).and_then(|mut r| {
                    thm1_conclusions(&mut r, &traj, d0)?;
                    Ok(r)
                });
                match r {
                    Ok(r) => col.theorem(id, &r)?,
                    Err(e) => CheckOutcome::failed(&e),
                }
            }
            CheckId::Thm2 => {
                let d0 = sc.delta0.expect("validated");
                let (psi_m, psi_max) = kernel.bounds();
                let t_end = traj.last().t;
                let window = sc.options.fit_window.map_or((0.5 * t_end, t_end), |w| (w[0], w[1]));
                let r = thm2_check(&state0, &params, psi_m, psi_max, d0).and_then(|mut r| {
                    if r.conditions_hold() {
                        thm2_conclusions(&mut r, &traj, d0, window)?;
                    }
                    Ok(r)
                });
                match r {
                    Ok(r) => col.theorem(id, &r)?,
                    Err(e) => CheckOutcome::failed(&e),
                }
            }
            CheckId::Ha => {
                let r = match &kernel {
                    CommunicationKernel::Multiplicative(p) => {
                        ha_multiplicative_check(&state0, &params, p).and_then(|mut r| {
                            ha_conclusions(&mut r, &traj, p, sc.options.angle_tol)?;
                            Ok(r)
                        })
                    }
                    other => Err(Error::Hypothesis(format!(
                        "the multiplicative-weight conditions need p_i p_j weights, got {}",
                        other.describe()
                    ))),
                };
                match r {
                    Ok(r) => col.theorem(id, &r)?,
                    Err(e) => CheckOutcome::failed(&e),
                }
            }
            _ => unreachable!("validated against the model"),
        };
        col.put(id, o);
    }
    Ok(())
}

fn conservation(traj: &Trajectory, records: &[DiagnosticsRecord], params: &crate::model::ModelParams) -> CheckOutcome {
    let speed = records.iter().map(|r| r.speed_drift).fold(0.0, f64::max);
    let sv = records.iter().map(|r| r.sv_drift).fold(0.0, f64::max);
    let sc0 = traj.first().spin_center();
    let scale = sc0.norm();
    let mut centre: f64 = 0.0;
    for s in &traj.samples {
        let want = sc0 * (-params.damping_rate() * s.t).exp();
        centre = centre.max((s.spin_center() - want).norm());
    }
    let rel = if scale > 0.0 { centre / scale } else { centre };
    let pass = speed <= SPEED_TOL && sv <= SV_TOL && rel <= SPIN_CENTER_REL_TOL;
    CheckOutcome::new(
        pass,
        format!("speed drift {speed:e}, s.v drift {sv:e}, spin centre decay error {rel:e} (relative)"),
    )
    .metric("speed_drift", speed)
    .metric("sv_drift", sv)
    .metric("spin_center_error", rel)
}

/// Residual of the dissipation identity with a second-order budget: at every sample where both
/// fit, the centred difference over `h` is compared with the one over `2h`, and the budget is
/// `max(1e−6, c·h²)` with `c = 2 max|r_2h − r_h| / (3h²)`.
fn dissipation(traj: &Trajectory, kernel: &CommunicationKernel, params: &crate::model::ModelParams) -> Result<CheckOutcome> {
    let fine = dissipation_audit(traj, kernel, params)?;
    let h = traj.spacing();
    let n = traj.samples.len();
    let (mut c, mut budget, mut worst) = (0.0, FD_BUDGET_FLOOR, fine.max_abs);
    if n >= 5 {
        // residual over 2h at fine sample m: audit of the subsequence with the parity of m
        let wide: Vec<Vec<f64>> = (0..2)
            .map(|offset| {
                let sub = Trajectory {
                    samples: traj.samples.iter().skip(offset).step_by(2).cloned().collect(),
                    meta: traj.meta.clone(),
                };
                dissipation_audit(&sub, kernel, params).map(|a| a.residual)
            })
            .collect::<Result<_>>()?;
        let mut diff: f64 = 0.0;
        worst = 0.0;
        for m in 2..n - 2 {
            let r2 = wide[m % 2][m / 2 - 1];
            let r1 = fine.residual[m - 1];
            diff = diff.max((r2 - r1).abs());
            worst = worst.max(r1.abs());
        }
        c = 2.0 * diff / (3.0 * h * h);
        budget = FD_BUDGET_FLOOR.max(c * h * h);
    }
    Ok(CheckOutcome::new(
        worst <= budget,
        format!("max residual {worst:e} against budget {budget:e} at spacing {h}"),
    )
    .metric("max_residual", worst)
    .metric("budget", budget)
    .metric("c_fd", c))
}

fn run_kuramoto(sc: &Scenario, col: &mut Collector) -> Result<()> {
    let k0 = sc.kuramoto_state()?;
    let kp = sc.kuramoto_params(k0.len())?;
    let traj = kuramoto_simulate(&kp, &k0, &sc.integrator)?;
    col.write("kuramoto.csv", KuramotoTrajectory::CSV_HEADER, &traj.csv_rows(&kp))?;
    for &id in &sc.checks {
        let o = match id {
            CheckId::Chy => match chy_condition(&kp, &k0) {
                Ok(r) => {
                    let last = traj.samples.last().expect("nonempty");
                    let first = &traj.samples[0];
                    let scale = first.d_omega().max(first.d_theta()).max(f64::MIN_POSITIVE);
                    let synced = last.d_omega() <= 1e-2 * scale;
                    col.tables.insert("chy".into(), serde_json::to_value(&r)?);
                    CheckOutcome::new(
                        r.holds && synced,
                        format!(
                            "condition {}, D(omega) {} -> {}",
                            if r.holds { "holds" } else { "fails" },
                            first.d_omega(),
                            last.d_omega()
                        ),
                    )
                    .metric("C1", r.c1)
                    .metric("mk", r.mk)
                    .metric("second_threshold", r.second_threshold)
                    .metric("D_theta_end", last.d_theta())
                    .metric("D_omega_end", last.d_omega())
                }
                Err(e) => CheckOutcome::failed(&e),
            },
            CheckId::Embedding => embedding(sc, &kp, &k0, &traj).unwrap_or_else(|e| CheckOutcome::failed(&e)),
            _ => unreachable!("validated against the model"),
        };
        col.put(id, o);
    }
    Ok(())
}

/// Integrates the planar spin embedding and compares unwrapped headings with the phases.
fn embedding(
    sc: &Scenario,
    kp: &crate::reductions::KuramotoParams,
    k0: &crate::reductions::KuramotoState,
    ktraj: &KuramotoTrajectory,
) -> Result<CheckOutcome> {
    let n = k0.len();
    let (m, g) = (kp.m[0], kp.gamma[0]);
    if kp.m.iter().any(|&x| x != m) || kp.gamma.iter().any(|&x| x != g) || kp.natural.iter().any(|&w| w != 0.0) {
        return Err(Error::NotApplicable(
            "the planar embedding needs common inertia and friction and no natural frequencies".into(),
        ));
    }
    let params = crate::model::ModelParams::new(m, g, kp.k)?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| n as f64 * kp.a[i * n + j]).collect()).collect();
    let kernel = CommunicationKernel::constant_matrix(rows)?;
    let st = embed_planar(k0, &params, None)?;
    let traj = simulate(&params, &kernel, &st, &sc.integrator, &mut [])?;
    let phases = unwrap_phases(&traj.samples);
    let mut worst: f64 = 0.0;
    for (ph, ks) in phases.iter().zip(&ktraj.samples) {
        for (a, b) in ph.iter().zip(&ks.theta) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(CheckOutcome::new(
        worst <= sc.options.embedding_tol,
        format!("max phase gap {worst:e} against {:e}", sc.options.embedding_tol),
    )
    .metric("max_phase_gap", worst))
}

fn run_cs(sc: &Scenario, col: &mut Collector) -> Result<()> {
    let kbar = sc.cs_kbar()?;
    let st0 = sc.cs_state()?;
    let kernel = sc.swarm_kernel(st0.len())?;
    let traj = cs_simulate(kbar, &kernel, &st0, &sc.integrator)?;
    let psi = match &kernel {
        CommunicationKernel::Metric(p) => Some(p.clone()),
        _ => None,
    };
    if let Some(p) = &psi {
        col.write("cs.csv", CSTrajectory::CSV_HEADER, &traj.csv_rows(kbar, p)?)?;
    }
    let need_metric = || Error::NotApplicable("needs a metric kernel".into());
    for &id in &sc.checks {
        let o = match id {
            CheckId::CsFlock => {
                let r = psi.as_ref().ok_or_else(need_metric).and_then(|p| {
                    let rep = cs_flocking_check(&st0, kbar, p)?;
                    col.tables.insert("cs_flock".into(), serde_json::to_value(&rep)?);
                    if !rep.holds {
                        return Ok(CheckOutcome::new(
                            false,
                            format!("condition fails: D(v0) = {} vs threshold {}", rep.dv0, rep.threshold),
                        )
                        .metric("threshold", rep.threshold));
                    }
                    let a = flock_audit(&traj, &rep, kbar, p)?;
                    Ok(CheckOutcome::new(
                        a.pass,
                        format!("sup D(x) = {} against D_inf = {}", a.sup_dx, a.d_inf),
                    )
                    .metric("sup_dx", a.sup_dx)
                    .metric("d_inf", a.d_inf)
                    .metric("threshold", rep.threshold)
                    .metric("rate", rep.rate.unwrap_or(f64::NAN))
                    .metric("envelope_margin", a.envelope_margin)
                    .metric("h_plus_max_increase", a.h_plus_max_increase)
                    .metric("h_minus_max_increase", a.h_minus_max_increase))
                });
                r.unwrap_or_else(|e| CheckOutcome::failed(&e))
            }
            CheckId::Sddi => psi
                .as_ref()
                .ok_or_else(need_metric)
                .and_then(|p| sddi_audit(&traj, kbar, &kernel, p))
                .map(|a| {
                    CheckOutcome::new(a.pass, format!("budget {:e}", a.budget))
                        .metric("dx_margin", a.dx_margin)
                        .metric("dv_margin", a.dv_margin)
                        .metric("a_margin", a.a_margin)
                        .metric("budget", a.budget)
                })
                .unwrap_or_else(|e| CheckOutcome::failed(&e)),
            CheckId::ChiLimit => {
                let s: &StudySpec = sc.study.as_ref().expect("validated");
                match chi_limit_study(&s.chis, s.gamma, s.k, &kernel, &st0, &sc.integrator) {
                    Ok(t) => {
                        let rows = chi_rows(&t);
                        col.write("chi_limit.csv", "chi,deviation", &rows)?;
                        col.tables.insert("chi_limit".into(), serde_json::to_value(&t)?);
                        chi_outcome(&t)
                    }
                    Err(e) => CheckOutcome::failed(&e),
                }
            }
            _ => unreachable!("validated against the model"),
        };
        col.put(id, o);
    }
    Ok(())
}

fn chi_rows(t: &ChiLimitTable) -> Vec<String> {
    t.rows
        .iter()
        .map(|r| format!("{},{}", fmt_sig17(r.chi), r.deviation.map_or("".into(), fmt_sig17)))
        .collect()
}

fn chi_outcome(t: &ChiLimitTable) -> CheckOutcome {
    let errs: Vec<String> = t.rows.iter().filter_map(|r| r.error.clone()).collect();
    let detail = if errs.is_empty() {
        let devs: Vec<String> = t
            .rows
            .iter()
            .map(|r| format!("chi {} -> {:e}", r.chi, r.deviation.unwrap_or(f64::NAN)))
            .collect();
        devs.join(", ")
    } else {
        errs.join("; ")
    };
    let mut o = CheckOutcome::new(t.strictly_decreasing, detail);
    if let Some(r) = t.order_ratio {
        o = o.metric("order_ratio", r);
    }
    // rows run from the largest to the smallest chi
    if let Some(d) = t.rows.first().and_then(|r| r.deviation) {
        o = o.metric("deviation_largest_chi", d);
    }
    if let Some(d) = t.rows.last().and_then(|r| r.deviation) {
        o = o.metric("deviation_smallest_chi", d);
    }
    o
}

fn run_gronwall(sc: &Scenario, col: &mut Collector) -> Result<()> {
    let g = sc.gronwall.as_ref().expect("validated");
    let opts = OracleOptions::default();
    let mut listed = Vec::new();
    for (i, p) in g.gron1.iter().enumerate() {
        let t_end = g.suite.map_or(20.0, |s| s.t_end);
        let o = gron1_oracle(p, t_end, &opts)?;
        let mut worst = f64::NEG_INFINITY;
        for (t, y) in o.t.iter().zip(&o.y) {
            worst = worst.max(y[0] - gron1_bound(p, *t)?);
        }
        listed.push((format!("gron1[{i}]"), worst));
    }
    for (i, p) in g.gron2.iter().enumerate() {
        let t_end = g.suite.map_or(20.0, |s| s.t_end);
        let o = gron2_oracle(p, t_end, &opts)?;
        let mut worst = f64::NEG_INFINITY;
        for (t, y) in o.t.iter().zip(&o.y) {
            worst = worst.max(y[0] - gron2_bound(p, *t)?);
        }
        listed.push((format!("gron2[{i}]"), worst));
    }
    for &id in &sc.checks {
        debug_assert_eq!(id, CheckId::GronwallSuite);
        let mut o = CheckOutcome::new(true, String::new());
        let mut rows: Vec<String> = Vec::new();
        if let Some(s) = g.suite {
            let rep = domination_suite(s.seed, s.count, s.t_end)?;
            rows.extend(rep.rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{},\"{}\"",
                    r.index,
                    r.form,
                    fmt_sig17(r.worst_gap),
                    fmt_sig17(r.worst_time),
                    fmt_sig17(r.min_y),
                    r.description
                )
            }));
            let worst = rep.rows.iter().map(|r| r.worst_gap).fold(f64::NEG_INFINITY, f64::max);
            o = o
                .metric("problems", rep.rows.len() as f64)
                .metric("rejected", rep.rejected as f64)
                .metric("worst_gap", worst)
                .metric("closed_form_error", rep.closed_form_error)
                .metric("vanishing_tail", rep.vanishing_tail)
                .metric("mu_star_error", rep.mu_star_error);
            o.detail = format!(
                "{} problems, worst oracle - bound {worst:e}, {} draws rejected",
                rep.rows.len(),
                rep.rejected
            );
            if !rep.pass {
                o.status = Status::Fail;
            }
            col.tables.insert("gronwall_suite".into(), serde_json::to_value(&rep)?);
        }
        for (name, w) in &listed {
            rows.push(format!("{name},listed,{},,,", fmt_sig17(*w)));
            o.metrics.insert(format!("{name}.worst_gap"), *w);
            if *w > DOMINATION_TOL {
                o.status = Status::Fail;
                o.detail.push_str(&format!("; {name} exceeds its bound by {w:e}"));
            }
        }
        col.write("gronwall_suite.csv", "index,form,worst_gap,worst_time,min_y,problem", &rows)?;
        col.put(id, o);
    }
    Ok(())
}

/// Numeric scenario fields a sweep may vary.
pub const SWEEP_AXES: &[&str] = &["chi", "gamma", "k", "delta0", "dt", "t_end", "seed", "kbar"];

/// Returns a copy of `sc` with `axis` set to `value`; `chi` on a unit-speed scenario sets the
/// inertia list of its limit study.
pub fn with_axis(sc: &Scenario, axis: &str, value: f64) -> Result<Scenario> {
    let mut s = sc.clone();
    let need_params = || Error::scenario(format!("sweep.{axis}"), "scenario has no params block");
    match axis {
        "chi" if s.model == ModelKind::Cs && s.study.is_some() => {
            s.study.as_mut().expect("checked").chis = vec![value];
        }
        "chi" => s.params.as_mut().ok_or_else(need_params)?.chi = value,
        "gamma" | "k" => {
            let mut touched = false;
            if let Some(p) = s.params.as_mut() {
                if axis == "gamma" { p.gamma = value } else { p.k = value }
                touched = true;
            }
            if let Some(st) = s.study.as_mut() {
                if axis == "gamma" { st.gamma = value } else { st.k = value }
                touched = true;
            }
            if !touched {
                return Err(need_params());
            }
        }
        "delta0" => s.delta0 = Some(value),
        "dt" => s.integrator.dt = value,
        "t_end" => s.integrator.t_end = value,
        "kbar" => s.kbar = Some(value),
        "seed" => {
            if !(value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                return Err(Error::scenario("seed", format!("seed must be a nonnegative integer, got {value}")));
            }
            let seed = value as u64;
            let mut any = false;
            if let Some(init @ InitialSpec::Generated { .. }) = s.initial.as_mut() {
                init.reseed(seed);
                any = true;
            }
            if let Some(suite) = s.gronwall.as_mut().and_then(|g| g.suite.as_mut()) {
                suite.seed = seed;
                any = true;
            }
            if !any {
                return Err(Error::scenario("seed", "scenario has no seeded generator"));
            }
        }
        other => {
            return Err(Error::scenario(
                "sweep.axis",
                format!("unknown axis {other}, expected one of {}", SWEEP_AXES.join(", ")),
            ))
        }
    }
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub index: usize,
    pub value: f64,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub scenario: String,
    pub axis: String,
    pub runs: Vec<SweepRun>,
    pub exit_code: i32,
}

impl SweepReport {
    /// Columns `value, exit_code`, then the status of every check, every check metric and every
    /// theorem case tag that occurs in any run.
    pub fn aggregate_csv(&self) -> String {
        let mut cols: Vec<String> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for r in self.runs.iter().filter_map(|r| r.report.as_ref()) {
            for (name, c) in &r.checks {
                seen.insert(format!("{name}.status"));
                for m in c.metrics.keys() {
                    seen.insert(format!("{name}.{m}"));
                }
            }
            for (name, t) in &r.theorems {
                if t.get("case").is_some_and(|c| !c.is_null()) {
                    seen.insert(format!("{name}.case"));
                }
            }
        }
        cols.extend(seen);
        let mut out = String::from("value,exit_code");
        for c in &cols {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for run in &self.runs {
            out.push_str(&fmt_sig17(run.value));
            out.push_str(&format!(",{}", run.exit_code));
            for c in &cols {
                out.push(',');
                let Some(rep) = &run.report else { continue };
                let (check, field) = c.split_once('.').expect("dotted column");
                let cell = match field {
                    "status" => rep.checks.get(check).map(|o| format!("{:?}", o.status).to_lowercase()),
                    "case" => rep
                        .theorems
                        .get(check)
                        .and_then(|t| t.get("case"))
                        .and_then(|c| c.as_str())
                        .map(|s| format!("\"{s}\"")),
                    m => rep.checks.get(check).and_then(|o| o.metrics.get(m)).map(|x| fmt_sig17(*x)),
                };
                if let Some(cell) = cell {
                    out.push_str(&cell);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One run per value, in parallel; each run writes to `out/run-NNN`, and `out/sweep.csv` plus
/// `out/sweep.json` aggregate them in value order.
pub fn sweep(sc: &Scenario, axis: &str, values: &[f64], out: Option<&Path>) -> Result<SweepReport> {
    if !SWEEP_AXES.contains(&axis) {
        return Err(Error::scenario(
            "sweep.axis",
            format!("unknown axis {axis}, expected one of {}", SWEEP_AXES.join(", ")),
        ));
    }
    let runs: Vec<SweepRun> = values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let dir = out.map(|d| d.join(format!("run-{index:03}")));
            let res = with_axis(sc, axis, value).and_then(|s| run(&s, dir.as_deref()));
            match res {
                Ok(rep) => SweepRun { index, value, exit_code: rep.exit_code, error: None, report: Some(rep) },
                Err(e) => SweepRun { index, value, exit_code: exit_code_for(&e), error: Some(e.to_string()), report: None },
            }
        })
        .collect();
    let exit_code = runs.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_PASS);
    let rep = SweepReport { scenario: sc.name.clone(), axis: axis.into(), runs, exit_code };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), rep.aggregate_csv())?;
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&rep)? + "\n")?;
    }
    Ok(rep)
}
