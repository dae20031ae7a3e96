//! Sufficient conditions of the flocking theorems for the spin model, their constants, and
//! checks of the conclusions against simulated trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{diameters, dv_dot, energy_functionals, geometric_factor};
use crate::error::{Error, Result};
use crate::gronwall::{
    gron1_uniform_bound, gron2_bound_with, gron2_rate, mu_star, Forcing, Gron1Problem,
    Gron2Problem, Gron2Rate,
};
use crate::integrator::Trajectory;
use crate::model::{CommunicationKernel, ModelParams, SwarmState, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constant {
    pub value: f64,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub formula: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conclusion {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem: String,
    pub inputs: BTreeMap<String, f64>,
    pub constants: BTreeMap<String, Constant>,
    pub case: Option<String>,
    pub conditions: Vec<Condition>,
    pub conclusions: Vec<Conclusion>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gron2_problem: Option<Gron2Problem>,
    #[serde(skip)]
    rate: Option<Gron2Rate>,
}

impl TheoremReport {
    fn new(theorem: &str) -> Self {
        TheoremReport {
            theorem: theorem.into(),
            inputs: BTreeMap::new(),
            constants: BTreeMap::new(),
            case: None,
            conditions: Vec::new(),
            conclusions: Vec::new(),
            notes: Vec::new(),
            gron2_problem: None,
            rate: None,
        }
    }

    fn constant(&mut self, name: &str, value: f64, formula: &str) {
        self.constants.insert(
            name.into(),
            Constant {
                value,
                formula: formula.into(),
            },
        );
    }

    fn condition(&mut self, name: &str, lhs: f64, rhs: f64, holds: bool, formula: &str) {
        self.conditions.push(Condition {
            name: name.into(),
            holds,
            lhs,
            rhs,
            formula: formula.into(),
        });
    }

    fn conclude(&mut self, name: &str, status: Status, detail: String) {
        self.conclusions.push(Conclusion {
            name: name.into(),
            status,
            detail,
        });
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.constants.get(name).map(|c| c.value)
    }

    pub fn conditions_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    /// Overall outcome: failing conditions or conclusions fail, an inconclusive conclusion
    /// makes the whole report inconclusive.
    pub fn status(&self) -> Status {
        if !self.conditions_hold() || self.conclusions.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if self.conclusions.iter().any(|c| c.status == Status::Inconclusive) {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }
}

fn check_delta0(delta0: f64) -> Result<()> {
    if delta0 > 0.0 && delta0 < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta0 must lie in (0, 1), got {delta0}")))
    }
}

fn max_spin_sq(state: &SwarmState) -> f64 {
    state.s.iter().map(|s| s.norm_squared()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Thm1Case {
    /// `γ > √(8kχψ_mδ₀)`
    Overdamped,
    /// `γ ≤ √(8kχψ_mδ₀)` and `Ḋ(v₀) ≥ 0`
    CriticalGrowing,
    /// `γ ≤ √(8kχψ_mδ₀)` and `Ḋ(v₀) < 0`
    CriticalShrinking,
}

impl Thm1Case {
    pub fn tag(&self) -> &'static str {
        match self {
            Thm1Case::Overdamped => "i",
            Thm1Case::CriticalGrowing => "ii, Ddot >= 0",
            Thm1Case::CriticalShrinking => "ii, Ddot < 0",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm1C0 {
    /// Closed-form constant as stated with the theorem.
    pub c0: f64,
    /// Half of the valid time-uniform Gronwall bound; differs from `c0` only in the critical
    /// case with growing diameter, where the closed form drops a term.
    pub c0_sharp: f64,
    pub case: Thm1Case,
    pub nu1: Option<f64>,
    /// `(χ/2)ℰ(0) + 𝒮(0)/k`
    pub lyap0: f64,
    pub dv0: f64,
    pub dv_dot0: f64,
    /// Linear Gronwall data the constant is derived from, with the forcing integral bound.
    #[serde(skip)]
    pub gron1: Gron1Problem,
    pub forcing_integral: f64,
}

/// Constant of the first theorem for `state0` and a constant weight matrix.
pub fn thm1_c0(
    state0: &SwarmState,
    params: &ModelParams,
    kernel: &CommunicationKernel,
    delta0: f64,
) -> Result<Thm1C0> {
    check_delta0(delta0)?;
    params.validate()?;
    let (psi_m, _) = kernel.bounds();
    let (chi, gamma, k) = (params.chi, params.gamma, params.k);
    let n = state0.len() as f64;
    let d = diameters(state0).v;
    let dd = dv_dot(state0, params);
    let en = energy_functionals(state0, kernel, params)?;
    let lyap0 = en.lyap;
    let threshold = (8.0 * k * chi * psi_m * delta0).sqrt();
    let int_g = 8.0 * n * k / (chi * gamma) * lyap0;
    let gron1 = Gron1Problem::new(
        1.0,
        gamma / chi,
        2.0 * k * psi_m * delta0 / chi,
        d * d,
        2.0 * d * dd,
        Forcing::custom(|_| 0.0, Some(int_g), "bound (16N/chi^2) S(t)"),
    )?;
    let (case, nu1, c0) = if gamma > threshold {
        let nu1 = 0.5 * (gamma / chi + (gamma * gamma / (chi * chi) - 8.0 * k * psi_m * delta0 / chi).sqrt());
        let root = (1.0 - 8.0 * k * chi * psi_m * delta0 / (gamma * gamma)).sqrt();
        let c0 = 0.5 * d * d
            + chi / (gamma * root) * (d * dd.abs() + 0.5 * nu1 * d * d)
            + 2.0 * k * n / (gamma * (2.0 * k * chi * psi_m * delta0).sqrt()) * lyap0;
        (Thm1Case::Overdamped, Some(nu1), c0)
    } else if dd >= 0.0 {
        let c0 = 0.5 * d * d * (1.0 + 2.0 * chi / gamma) + 4.0 * k * n / (gamma * gamma) * lyap0;
        (Thm1Case::CriticalGrowing, None, c0)
    } else {
        let c0 = 0.5 * d * d + 4.0 * k * n / (gamma * gamma) * lyap0;
        (Thm1Case::CriticalShrinking, None, c0)
    };
    let c0_sharp = match gron1_uniform_bound(&gron1) {
        Ok(u) => 0.5 * u.value,
        // ψ_m = 0 leaves no decay term; the uniform bound is unavailable
        Err(_) => f64::INFINITY,
    };
    Ok(Thm1C0 {
        c0,
        c0_sharp,
        case,
        nu1,
        lyap0,
        dv0: d,
        dv_dot0: dd,
        gron1,
        forcing_integral: int_g,
    })
}

fn inputs(report: &mut TheoremReport, state0: &SwarmState, params: &ModelParams, psi_m: f64, psi_max: f64, delta0: f64) {
    for (k, v) in [
        ("N", state0.len() as f64),
        ("chi", params.chi),
        ("gamma", params.gamma),
        ("k", params.k),
        ("psi_m", psi_m),
        ("psi_M", psi_max),
        ("delta0", delta0),
    ] {
        report.inputs.insert(k.into(), v);
    }
}

fn geometric_condition(report: &mut TheoremReport, state0: &SwarmState, delta0: f64) -> Result<()> {
    let a0 = geometric_factor(state0)?;
    report.constant("A0", a0, "min_{i != j} v_i . v_j at t = 0");
    report.condition("A(v0) > delta0", a0, delta0, a0 > delta0, "A(v0) > delta0");
    Ok(())
}

/// Conditions of the first theorem (constant symmetric weights).
pub fn thm1_check(
    state0: &SwarmState,
    params: &ModelParams,
    kernel: &CommunicationKernel,
    delta0: f64,
) -> Result<TheoremReport> {
    if !kernel.is_constant() {
        return Err(Error::Hypothesis(format!(
            "the first theorem needs a constant symmetric matrix, got {}",
            kernel.describe()
        )));
    }
    let c = thm1_c0(state0, params, kernel, delta0)?;
    let (psi_m, psi_max) = kernel.bounds();
    let mut r = TheoremReport::new("thm1");
    inputs(&mut r, state0, params, psi_m, psi_max, delta0);
    geometric_condition(&mut r, state0, delta0)?;
    r.case = Some(c.case.tag().into());
    r.constant("D(v0)", c.dv0, "max_{i,j} |v_i - v_j| at t = 0");
    r.constant("Ddot(v0)", c.dv_dot0, "(v_i - v_j).(vdot_i - vdot_j)/D(v0) on the extremal pair");
    r.constant("lyap0", c.lyap0, "(chi/2) E(0) + S(0)/k");
    r.constant(
        "threshold_gamma",
        (8.0 * params.k * params.chi * psi_m * delta0).sqrt(),
        "sqrt(8 k chi psi_m delta0)",
    );
    let formula = match c.case {
        Thm1Case::Overdamped => "1/2 D^2 + chi/(gamma sqrt(1 - 8 k chi psi_m delta0/gamma^2)) (D|Ddot| + 1/2 nu1 D^2) + 2kN/(gamma sqrt(2 k chi psi_m delta0)) lyap0",
        Thm1Case::CriticalGrowing => "1/2 D^2 (1 + 2 chi/gamma) + 4kN/gamma^2 lyap0",
        Thm1Case::CriticalShrinking => "1/2 D^2 + 4kN/gamma^2 lyap0",
    };
    r.constant("C0", c.c0, formula);
    r.constant(
        "C0_sharp",
        c.c0_sharp,
        "half the time-uniform bound of the linear Gronwall inequality with a = 1, b = gamma/chi, c = 2 k psi_m delta0/chi",
    );
    if let Some(nu1) = c.nu1 {
        r.constant("nu1", nu1, "(gamma/chi + sqrt(gamma^2/chi^2 - 8 k psi_m delta0/chi))/2");
        r.notes.push(
            "nu1 is the larger root of h^2 - (gamma/chi) h + 2 k psi_m delta0/chi from the Gronwall mapping".into(),
        );
    }
    r.condition("C0 < 1 - delta0", c.c0, 1.0 - delta0, c.c0 < 1.0 - delta0, formula);
    if c.c0_sharp > c.c0 {
        r.notes.push(format!(
            "the closed-form C0 = {} is below the sharp Gronwall value {}; the closed form omits the growth of D(v)^2 driven by Ddot(v0) > 0",
            c.c0, c.c0_sharp
        ));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Invariance {
    pub held: bool,
    pub first_violation: Option<f64>,
    pub min_a: f64,
}

/// First sample with `𝒜(v) ≤ δ₀`, if any.
pub fn verify_invariance(traj: &Trajectory, delta0: f64) -> Result<Invariance> {
    let mut min_a = f64::INFINITY;
    let mut first = None;
    for s in &traj.samples {
        let a = geometric_factor(s)?;
        min_a = min_a.min(a);
        if a <= delta0 && first.is_none() {
            first = Some(s.t);
        }
    }
    Ok(Invariance {
        held: first.is_none(),
        first_violation: first,
        min_a,
    })
}

/// Least-squares decay rate `−d log y / dt` over samples with `t ∈ [window.0, window.1]`.
pub fn fit_decay_rate(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, y)| (*t, *y))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("decay fit needs two samples in the window".into()));
    }
    if let Some((t, y)) = pts.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "decay fit needs positive values, got {y} at t = {t}"
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}

fn dv_series(traj: &Trajectory) -> (Vec<f64>, Vec<f64>) {
    (
        traj.times(),
        traj.samples.iter().map(|s| diameters(s).v).collect(),
    )
}

fn invariance_conclusion(r: &mut TheoremReport, traj: &Trajectory, delta0: f64) -> Result<()> {
    let inv = verify_invariance(traj, delta0)?;
    let detail = match inv.first_violation {
        None => format!("min A(v(t)) = {} > {delta0}", inv.min_a),
        Some(t) => format!("A(v) <= {delta0} first at t = {t}"),
    };
    r.constant("min_A", inv.min_a, "min over samples of A(v(t))");
    r.conclude("invariance", if inv.held { Status::Pass } else { Status::Fail }, detail);
    Ok(())
}

/// Adds the simulated conclusions of the first theorem: invariance of `𝒜(v) > δ₀`, the
/// diameter falling below a hundredth of its initial value, and a smaller late-half supremum.
pub fn thm1_conclusions(r: &mut TheoremReport, traj: &Trajectory, delta0: f64) -> Result<()> {
    invariance_conclusion(r, traj, delta0)?;
    let (t, dv) = dv_series(traj);
    let d0 = dv[0];
    let dend = *dv.last().unwrap_or(&d0);
    r.constant("D(v(t_end))", dend, "velocity diameter at the last sample");
    let decayed = dend < d0 / 100.0 || d0 == 0.0;
    r.conclude(
        "decay",
        if decayed { Status::Pass } else { Status::Fail },
        format!("D(v(t_end)) = {dend}, D(v0)/100 = {}", d0 / 100.0),
    );
    let half = 0.5 * t.last().copied().unwrap_or(0.0);
    let sup = |lo: f64, hi: f64| {
        t.iter()
            .zip(&dv)
            .filter(|(s, _)| **s >= lo && **s <= hi)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    };
    let (early, late) = (sup(0.0, half), sup(half, f64::INFINITY));
    r.conclude(
        "tail",
        if late < early || early == 0.0 { Status::Pass } else { Status::Fail },
        format!("sup D(v) on the late half {late} vs early half {early}"),
    );
    Ok(())
}

/// Conditions of the second theorem and the data of its decay envelope.
pub fn thm2_check(
    state0: &SwarmState,
    params: &ModelParams,
    psi_m: f64,
    psi_max: f64,
    delta0: f64,
) -> Result<TheoremReport> {
    check_delta0(delta0)?;
    params.validate()?;
    if !(psi_m > 0.0 && psi_m <= psi_max) {
        return Err(Error::Hypothesis(format!(
            "the second theorem needs 0 < psi_m <= psi_M, got {psi_m}, {psi_max}"
        )));
    }
    let (chi, gamma, k) = (params.chi, params.gamma, params.k);
    let mut r = TheoremReport::new("thm2");
    inputs(&mut r, state0, params, psi_m, psi_max, delta0);
    geometric_condition(&mut r, state0, delta0)?;
    let d = diameters(state0);
    let dd = dv_dot(state0, params);
    let spin_term = d.s * d.s + 2.0 * max_spin_sq(state0);
    let h1_rhs = (6.0 * k * chi * psi_max / (delta0 * psi_m)).sqrt();
    r.condition("H1", gamma, h1_rhs, gamma > h1_rhs, "gamma > sqrt(6 k chi psi_M/(delta0 psi_m))");
    let c0 = 0.5 * d.v * d.v + chi * d.v * dd.abs() / gamma + 2.0 / (gamma * gamma) * spin_term;
    r.constant(
        "C0",
        c0,
        "1/2 D(v0)^2 + chi D(v0)|Ddot(v0)|/gamma + 2/gamma^2 (D(s0)^2 + 2 max|s_i0|^2)",
    );
    r.condition("H2", c0, 1.0 - delta0, c0 < 1.0 - delta0, "C0 < 1 - delta0");
    let p = Gron2Problem {
        a: gamma / chi,
        b: 2.0 * k * psi_m * delta0 / chi,
        c: 12.0 * k * k * psi_max / (gamma * chi),
        d: 4.0 / (chi * chi) * spin_term,
        nu: gamma / chi,
        y0: d.v * d.v,
        y1: 2.0 * d.v * dd.abs(),
    };
    let ms = mu_star(&p);
    r.constant("d_star", ms.d_star, "b nu - c with a = nu = gamma/chi, b = 2 k psi_m delta0/chi, c = 12 k^2 psi_M/(gamma chi)");
    r.constant("D(v0)", d.v, "max_{i,j} |v_i - v_j| at t = 0");
    r.constant("Ddot(v0)", dd, "(v_i - v_j).(vdot_i - vdot_j)/D(v0) on the extremal pair");
    r.notes.push(format!("feasible rate set {}", ms.description));
    if let Some(mu) = ms.mu_star {
        r.constant("mu_star", mu, "sup of the feasible rate set");
        let branch = if mu < gamma / (2.0 * chi) { "exponential" } else { "sqrt(t) exponential" };
        r.case = Some(branch.into());
        match gron2_rate(&p) {
            Ok(rate) => {
                r.constant("envelope_rate", 0.5 * rate.mu.min(rate.d1), "min(mu, gamma/chi - mu)/2 for the chosen mu");
                r.rate = Some(rate);
            }
            Err(e) => r.notes.push(format!("no envelope: {e}")),
        }
    }
    r.notes.push(
        "envelope constants are the explicit Gronwall bound with y0 = D(v0)^2 and y1 = 2 D(v0)|Ddot(v0)|".into(),
    );
    r.gron2_problem = Some(p);
    Ok(r)
}

/// Upper bound on `D(v(t))` from the convolution Gronwall inequality.
pub fn thm2_envelope(report: &TheoremReport, t: f64) -> Result<f64> {
    if !report.conditions_hold() {
        return Err(Error::Hypothesis("the second theorem's conditions fail".into()));
    }
    let (Some(p), Some(rate)) = (report.gron2_problem.as_ref(), report.rate.as_ref()) else {
        return Err(Error::NoRate("report carries no decay rate".into()));
    };
    Ok(gron2_bound_with(p, rate, t).max(0.0).sqrt())
}

/// Adds envelope domination, invariance and the fitted late-window rate.
pub fn thm2_conclusions(
    r: &mut TheoremReport,
    traj: &Trajectory,
    delta0: f64,
    window: (f64, f64),
) -> Result<()> {
    invariance_conclusion(r, traj, delta0)?;
    let (t, dv) = dv_series(traj);
    let mut worst = f64::INFINITY;
    let mut worst_t = 0.0;
    for (tn, d) in t.iter().zip(&dv) {
        let m = thm2_envelope(r, *tn)? - d;
        if m < worst {
            worst = m;
            worst_t = *tn;
        }
    }
    r.constant("envelope_margin", worst, "min over samples of envelope(t) - D(v(t))");
    r.conclude(
        "envelope",
        if worst >= -1e-8 { Status::Pass } else { Status::Fail },
        format!("min margin {worst} at t = {worst_t}"),
    );
    let mu = r.value("mu_star").unwrap_or(0.0);
    if dv.iter().all(|d| *d == 0.0) {
        r.conclude("rate", Status::Pass, "velocities aligned at every sample".into());
        return Ok(());
    }
    match fit_decay_rate(&t, &dv, window) {
        Ok(rate) => {
            r.constant("fitted_rate", rate, "least-squares slope of -log D(v) on the late window");
            r.conclude(
                "rate",
                if rate >= 0.5 * mu - 0.05 { Status::Pass } else { Status::Fail },
                format!("fitted {rate} vs mu*/2 - 0.05 = {}", 0.5 * mu - 0.05),
            );
        }
        Err(e) => r.conclude("rate", Status::Inconclusive, e.to_string()),
    }
    Ok(())
}

/// Conditions for convergence under multiplicative weights `ψ_ij = p_i p_j`.
pub fn ha_multiplicative_check(
    state0: &SwarmState,
    params: &ModelParams,
    p: &[f64],
) -> Result<TheoremReport> {
    params.validate()?;
    let n = state0.len();
    if p.len() != n {
        return Err(Error::InvalidParameter(format!("{} weights for {n} particles", p.len())));
    }
    let kernel = CommunicationKernel::multiplicative(p.to_vec())?;
    let en = energy_functionals(state0, &kernel, params)?;
    let nf = n as f64;
    let pc = p.iter().sum::<f64>() / nf;
    let lhs = en.e + 2.0 / (params.chi * params.k) * en.s;
    let th1 = 2.0 * pc * pc;
    let th2 = p
        .iter()
        .map(|&pi| 8.0 * pi * (nf * pc - pi) / (nf * nf))
        .fold(f64::INFINITY, f64::min);
    let (pm, pmax) = kernel.bounds();
    let mut r = TheoremReport::new("ha");
    inputs(&mut r, state0, params, pm, pmax, f64::NAN);
    r.inputs.remove("delta0");
    r.constant("p_c", pc, "(1/N) sum p_i");
    r.constant("lhs", lhs, "E(0) + 2/(chi k) S(0)");
    r.constant("threshold_i", th1, "2 p_c^2");
    r.constant("threshold_ii", th2, "min_i 8 p_i (N p_c - p_i)/N^2");
    let (c1, c2) = (lhs < th1, lhs < th2);
    r.case = Some(if c2 { "ii" } else if c1 { "i" } else { "none" }.into());
    r.condition("condition (i)", lhs, th1, c1, "E(0) + 2/(chi k) S(0) < 2 p_c^2");
    if c2 {
        r.condition("condition (ii)", lhs, th2, c2, "E(0) + 2/(chi k) S(0) < min_i 8 p_i (N p_c - p_i)/N^2");
    } else {
        r.notes.push(format!("condition (ii) fails: {lhs} >= {th2}"));
    }
    Ok(r)
}

/// `v̄_c = (1/N) Σ p_i v_i`
pub fn weighted_mean_velocity(state: &SwarmState, p: &[f64]) -> Vec3 {
    state
        .v
        .iter()
        .zip(p)
        .fold(Vec3::zeros(), |acc, (v, pi)| acc + v * *pi)
        / state.len() as f64
}

/// Checks that every final velocity lies within `tol` radians of `v̄_c/|v̄_c|` (or of `±` that
/// direction when only condition (i) holds).
pub fn ha_conclusions(r: &mut TheoremReport, traj: &Trajectory, p: &[f64], tol: f64) -> Result<()> {
    let last = traj.last();
    let vc = weighted_mean_velocity(last, p);
    if vc.norm() < 1e-12 {
        r.conclude(
            "alignment",
            Status::Inconclusive,
            "weighted mean velocity vanishes, limit direction undefined".into(),
        );
        return Ok(());
    }
    let dir = vc / vc.norm();
    let two_sided = r.case.as_deref() == Some("i");
    let mut worst: f64 = 0.0;
    for v in &last.v {
        let ang = |d: &Vec3| (v.dot(d) / v.norm()).clamp(-1.0, 1.0).acos();
        let a = if two_sided { ang(&dir).min(ang(&-dir)) } else { ang(&dir) };
        worst = worst.max(a);
    }
    r.constant("max_angle", worst, "max_i angle(v_i(t_end), vbar_c/|vbar_c|)");
    r.conclude(
        "alignment",
        if worst <= tol { Status::Pass } else { Status::Fail },
        format!("max angle {worst} vs tolerance {tol} at t = {}", last.t),
    );
    Ok(())
}
