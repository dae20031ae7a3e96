//! Scalar observables (diameters, geometric factor, energy functionals) and trajectory audits
//! of the dissipation identity, the spin-integral bound and the velocity-diameter inequalities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{CommunicationKernel, ModelParams, SwarmState, Vec3};

/// Floor of the finite-difference allowance used by the inequality audits.
pub const FD_BUDGET_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diameters {
    pub x: f64,
    pub v: f64,
    pub s: f64,
}

/// Lexicographically smallest pair `(i, j)`, `i < j`, maximising `|w_i − w_j|`, with the distance.
pub fn extremal_pair(w: &[Vec3]) -> Option<(usize, usize, f64)> {
    let n = w.len();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (w[i] - w[j]).norm();
            if best.is_none_or(|(_, _, b)| d > b) {
                best = Some((i, j, d));
            }
        }
    }
    best
}

fn diameter(w: &[Vec3]) -> f64 {
    extremal_pair(w).map_or(0.0, |(_, _, d)| d)
}

/// `(D(x), D(v), D(s))` by exhaustive pair scan.
pub fn diameters(state: &SwarmState) -> Diameters {
    Diameters {
        x: diameter(&state.x),
        v: diameter(&state.v),
        s: diameter(&state.s),
    }
}

/// `𝒜(v) = min_{i≠j} v_i · v_j`.
pub fn geometric_factor(state: &SwarmState) -> Result<f64> {
    let n = state.len();
    if n < 2 {
        return Err(Error::Undefined("geometric factor needs at least two particles".into()));
    }
    let mut a = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            a = a.min(state.v[i].dot(&state.v[j]));
        }
    }
    Ok(a)
}

/// Time derivative of `D(v)` along the extremal pair, `0` when `D(v) = 0`.
pub fn dv_dot(state: &SwarmState, params: &ModelParams) -> f64 {
    match extremal_pair(&state.v) {
        Some((i, j, d)) if d > 0.0 => {
            let vdot = |k: usize| state.s[k].cross(&state.v[k]) / params.chi;
            (state.v[i] - state.v[j]).dot(&(vdot(i) - vdot(j))) / d
        }
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy {
    /// `ℰ = (1/N²) Σ_ij ψ_ij |v_i − v_j|²`
    pub e: f64,
    /// `𝒮 = (1/N) Σ_i |s_i|²`
    pub s: f64,
    /// `(χ/2) ℰ + (1/k) 𝒮`
    pub lyap: f64,
}

pub fn energy_functionals(
    state: &SwarmState,
    kernel: &CommunicationKernel,
    params: &ModelParams,
) -> Result<Energy> {
    let n = state.len();
    let w = kernel.weight_matrix(state)?;
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            e += w[i * n + j] * (state.v[i] - state.v[j]).norm_squared();
        }
    }
    e /= (n * n) as f64;
    let s = state.s.iter().map(|s| s.norm_squared()).sum::<f64>() / n as f64;
    Ok(Energy {
        e,
        s,
        lyap: 0.5 * params.chi * e + s / params.k,
    })
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dx: f64,
    pub dv: f64,
    pub ds: f64,
    /// `None` for a single particle.
    pub a: Option<f64>,
    pub e: f64,
    pub s: f64,
    pub lyap: f64,
    pub sc_norm: f64,
    pub dv_dot: f64,
    /// `max_i | |v_i(t)| − |v_i(0)| |`
    pub speed_drift: f64,
    /// `max_i |s_i(t)·v_i(t) − s_i(0)·v_i(0)|`
    pub sv_drift: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "t,Dx,Dv,Ds,A,E,S,lyap,sc_norm,Dv_dot,speed_drift,sv_drift";

    pub fn csv_row(&self) -> String {
        let cols = [
            self.t,
            self.dx,
            self.dv,
            self.ds,
            self.a.unwrap_or(f64::NAN),
            self.e,
            self.s,
            self.lyap,
            self.sc_norm,
            self.dv_dot,
            self.speed_drift,
            self.sv_drift,
        ];
        cols.iter().map(|c| fmt_sig17(*c)).collect::<Vec<_>>().join(",")
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// All observables of `state`, with drifts measured against `initial`.
pub fn record(
    state: &SwarmState,
    initial: &SwarmState,
    kernel: &CommunicationKernel,
    params: &ModelParams,
) -> Result<DiagnosticsRecord> {
    let d = diameters(state);
    let en = energy_functionals(state, kernel, params)?;
    let mut speed_drift: f64 = 0.0;
    let mut sv_drift: f64 = 0.0;
    for i in 0..state.len() {
        speed_drift = speed_drift.max((state.v[i].norm() - initial.v[i].norm()).abs());
        sv_drift = sv_drift
            .max((state.s[i].dot(&state.v[i]) - initial.s[i].dot(&initial.v[i])).abs());
    }
    Ok(DiagnosticsRecord {
        t: state.t,
        dx: d.x,
        dv: d.v,
        ds: d.s,
        a: geometric_factor(state).ok(),
        e: en.e,
        s: en.s,
        lyap: en.lyap,
        sc_norm: state.spin_center().norm(),
        dv_dot: dv_dot(state, params),
        speed_drift,
        sv_drift,
    })
}

/// Diagnostics for every sample of a trajectory.
pub fn trajectory_records(
    traj: &Trajectory,
    kernel: &CommunicationKernel,
    params: &ModelParams,
) -> Result<Vec<DiagnosticsRecord>> {
    let first = traj.first();
    traj.samples
        .iter()
        .map(|s| record(s, first, kernel, params))
        .collect()
}

fn require_constant(kernel: &CommunicationKernel, what: &str) -> Result<()> {
    if kernel.is_constant() {
        Ok(())
    } else {
        Err(Error::NotApplicable(format!(
            "{what} holds only for constant symmetric weights, got {}",
            kernel.describe()
        )))
    }
}

fn require_spacing(traj: &Trajectory, min_samples: usize) -> Result<f64> {
    if traj.samples.len() < min_samples {
        return Err(Error::NotApplicable(format!(
            "audit needs at least {min_samples} samples, trajectory has {}",
            traj.samples.len()
        )));
    }
    Ok(traj.spacing())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationAudit {
    pub t: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
}

/// Residual of `d/dt((χ/2)ℰ + 𝒮/k) + (2γ/(χk)) 𝒮 = 0` with a centred difference at interior samples.
pub fn dissipation_audit(
    traj: &Trajectory,
    kernel: &CommunicationKernel,
    params: &ModelParams,
) -> Result<DissipationAudit> {
    require_constant(kernel, "the dissipation identity")?;
    let h = require_spacing(traj, 3)?;
    let en: Vec<Energy> = traj
        .samples
        .iter()
        .map(|s| energy_functionals(s, kernel, params))
        .collect::<Result<_>>()?;
    let rate = 2.0 * params.gamma / (params.chi * params.k);
    let mut t = Vec::new();
    let mut residual = Vec::new();
    for n in 1..en.len() - 1 {
        let d = (en[n + 1].lyap - en[n - 1].lyap) / (2.0 * h);
        t.push(traj.samples[n].t);
        residual.push(d + rate * en[n].s);
    }
    let max_abs = residual.iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(DissipationAudit { t, residual, max_abs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SIntegralAudit {
    /// Trapezoidal `∫₀^t 𝒮` at each sample.
    pub cumulative: Vec<f64>,
    /// `(χk/2γ)((χ/2)ℰ(0) + 𝒮(0)/k)`
    pub bound: f64,
    /// Richardson estimate of the trapezoid error of the final value.
    pub quadrature_error: f64,
    /// `bound − max cumulative`
    pub margin: f64,
    pub pass: bool,
}

/// Cumulative spin integral against its a-priori energy bound.
pub fn s_integral_audit(
    traj: &Trajectory,
    kernel: &CommunicationKernel,
    params: &ModelParams,
    e0: f64,
    s0: f64,
) -> Result<SIntegralAudit> {
    require_constant(kernel, "the spin integral bound")?;
    let s_series: Vec<f64> = traj
        .samples
        .iter()
        .map(|st| st.s.iter().map(|s| s.norm_squared()).sum::<f64>() / st.len() as f64)
        .collect();
    let h = traj.spacing();
    let mut cumulative = vec![0.0];
    for n in 1..s_series.len() {
        let prev = cumulative[n - 1];
        cumulative.push(prev + 0.5 * h * (s_series[n - 1] + s_series[n]));
    }
    // coarse trapezoid over every other sample for the Richardson estimate
    let mut coarse = 0.0;
    let mut n = 2;
    while n < s_series.len() {
        coarse += h * (s_series[n - 2] + s_series[n]);
        n += 2;
    }
    let fine_even = cumulative[2 * ((s_series.len() - 1) / 2)];
    let quadrature_error = (fine_even - coarse).abs() / 3.0;
    let bound = params.chi * params.k / (2.0 * params.gamma) * (0.5 * params.chi * e0 + s0 / params.k);
    let peak = cumulative.iter().copied().fold(0.0, f64::max);
    let margin = bound - peak;
    Ok(SIntegralAudit {
        pass: margin >= -(2.0 * quadrature_error + 1e-12),
        cumulative,
        bound,
        quadrature_error,
        margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityAudit {
    pub spacing: f64,
    pub audited: usize,
    pub skipped: usize,
    /// Calibrated finite-difference constant, allowance is `max(1e-6, c_fd · spacing²)`.
    pub c_fd: f64,
    pub budget: f64,
    /// `min (RHS − LHS)` of the pointwise spin form.
    pub bas1_margin: f64,
    /// `min (RHS − LHS)` of the convolution form.
    pub bas2_margin: f64,
    /// Same margins with the lower bound `ψ_m δ₀` in place of `ψ(D(x)) 𝒜(v)`, evaluated on samples
    /// with `𝒜(v) > δ₀`; present for kernels with a positive global lower bound.
    pub bas1_delta0_margin: Option<f64>,
    pub bas2_delta0_margin: Option<f64>,
    pub worst_time: f64,
    pub bas1_pass: bool,
    pub bas2_pass: bool,
}

impl InequalityAudit {
    pub fn passed(&self) -> bool {
        self.bas1_pass && self.bas2_pass
    }
}

/// Audits both velocity-diameter inequalities along `traj`.
///
/// Derivatives of `D(v)²` are taken for the extremal pair of the centre sample, held fixed over
/// the stencil, so kinks of the maximum where the extremal pair switches do not pollute the
/// second difference.
pub fn inequality_audit(
    traj: &Trajectory,
    kernel: &CommunicationKernel,
    params: &ModelParams,
    delta0: Option<f64>,
) -> Result<InequalityAudit> {
    let h = require_spacing(traj, 5)?;
    let samples = &traj.samples;
    if samples[0].len() < 2 {
        return Err(Error::NotApplicable("inequality audit needs N >= 2".into()));
    }
    let (psi_m, psi_max) = kernel.bounds();
    let metric = match kernel {
        CommunicationKernel::Metric(psi) => Some(psi),
        _ => None,
    };
    let nu = params.damping_rate();
    let chi = params.chi;
    let k = params.k;

    let s0 = &samples[0];
    let max_s2 = |st: &SwarmState| st.s.iter().map(|s| s.norm_squared()).fold(0.0, f64::max);
    let c2 = 4.0 / (chi * chi) * (diameters(s0).s.powi(2) + 2.0 * max_s2(s0));

    let dvsq: Vec<f64> = samples.iter().map(|s| diameters(s).v.powi(2)).collect();
    let areas: Vec<f64> = samples
        .iter()
        .map(geometric_factor)
        .collect::<Result<_>>()?;
    // ∫₀ᵗ e^{−ν(t−s)} D(v(s))² ds by the recursive trapezoid rule
    let decay = (-nu * h).exp();
    let mut conv = vec![0.0; samples.len()];
    for n in 1..samples.len() {
        conv[n] = decay * conv[n - 1] + 0.5 * h * (decay * dvsq[n - 1] + dvsq[n]);
    }

    struct Row {
        t: f64,
        lhs_fine: f64,
        lhs_coarse: f64,
        drive: f64,
        y: f64,
        a: f64,
        rhs1: f64,
        rhs2: f64,
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for n in 2..samples.len() - 2 {
        if areas[n - 2..=n + 2].iter().any(|&a| a <= 0.0) {
            skipped += 1;
            continue;
        }
        let st = &samples[n];
        let Some((i, j, _)) = extremal_pair(&st.v) else {
            continue;
        };
        let y = |m: usize| (samples[m].v[i] - samples[m].v[j]).norm_squared();
        let (ym2, ym1, y0, yp1, yp2) = (y(n - 2), y(n - 1), y(n), y(n + 1), y(n + 2));
        let lhs_fine = (yp1 - 2.0 * y0 + ym1) / (h * h) + nu * (yp1 - ym1) / (2.0 * h);
        let lhs_coarse =
            (yp2 - 2.0 * y0 + ym2) / (4.0 * h * h) + nu * (yp2 - ym2) / (4.0 * h);
        let psi_low = match metric {
            Some(psi) => psi.eval(diameters(st).x),
            None => psi_m,
        };
        let d = diameters(st);
        let rhs1 = 4.0 / (chi * chi) * (d.s * d.s + max_s2(st) * d.v * d.v);
        let c1 = 4.0 * k * k * psi_max / (params.gamma * chi) * (1.0 + d.v * d.v);
        let rhs2 = c1 * conv[n] + c2 * (-nu * st.t).exp();
        rows.push(Row {
            t: st.t,
            lhs_fine,
            lhs_coarse,
            drive: 2.0 * k / chi * psi_low,
            y: y0,
            a: areas[n],
            rhs1,
            rhs2,
        });
    }
    if rows.is_empty() {
        return Err(Error::NotApplicable(
            "no interior sample with a positive geometric factor".into(),
        ));
    }
    let err_max = rows
        .iter()
        .map(|r| (r.lhs_fine - r.lhs_coarse).abs() / 3.0)
        .fold(0.0, f64::max);
    let c_fd = 2.0 * err_max / (h * h);
    let budget = FD_BUDGET_FLOOR.max(c_fd * h * h);

    let mut bas1 = f64::INFINITY;
    let mut bas2 = f64::INFINITY;
    let mut worst_time = rows[0].t;
    let mut worst = f64::INFINITY;
    let delta_form = delta0.filter(|_| psi_m > 0.0 && metric.is_none());
    let mut bas1_d: Option<f64> = None;
    let mut bas2_d: Option<f64> = None;
    for r in &rows {
        let lhs = r.lhs_fine + r.drive * r.y * r.a;
        let m1 = r.rhs1 - lhs;
        let m2 = r.rhs2 - lhs;
        bas1 = bas1.min(m1);
        bas2 = bas2.min(m2);
        if m1.min(m2) < worst {
            worst = m1.min(m2);
            worst_time = r.t;
        }
        if let Some(d0) = delta_form {
            if r.a > d0 {
                let lhs_d = r.lhs_fine + 2.0 * k / chi * psi_m * d0 * r.y;
                bas1_d = Some(bas1_d.map_or(r.rhs1 - lhs_d, |b: f64| b.min(r.rhs1 - lhs_d)));
                bas2_d = Some(bas2_d.map_or(r.rhs2 - lhs_d, |b: f64| b.min(r.rhs2 - lhs_d)));
            }
        }
    }
    Ok(InequalityAudit {
        spacing: h,
        audited: rows.len(),
        skipped,
        c_fd,
        budget,
        bas1_margin: bas1,
        bas2_margin: bas2,
        bas1_delta0_margin: bas1_d,
        bas2_delta0_margin: bas2_d,
        worst_time,
        bas1_pass: bas1 >= -budget,
        bas2_pass: bas2 >= -budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate, IntegratorConfig};
    use approx::assert_abs_diff_eq;

    fn pair(v1: Vec3, v2: Vec3) -> SwarmState {
        SwarmState::new(
            0.0,
            vec![Vec3::zeros(), Vec3::x()],
            vec![v1, v2],
            vec![Vec3::zeros(); 2],
        )
        .unwrap()
    }

    #[test]
    fn antipodal_diameter() {
        let st = pair(Vec3::x(), -Vec3::x());
        assert_abs_diff_eq!(diameters(&st).v, 2.0);
    }

    #[test]
    fn identical_particles_have_zero_diameters() {
        let mut st = SwarmState::aligned(4, Vec3::z());
        st.x = vec![Vec3::new(1.0, 2.0, 3.0); 4];
        let d = diameters(&st);
        assert_eq!((d.x, d.v, d.s), (0.0, 0.0, 0.0));
        let single = SwarmState::aligned(1, Vec3::z());
        assert_eq!(diameters(&single).x, 0.0);
    }

    #[test]
    fn geometric_factor_examples() {
        assert_abs_diff_eq!(geometric_factor(&pair(Vec3::x(), Vec3::y())).unwrap(), 0.0);
        assert_abs_diff_eq!(geometric_factor(&SwarmState::aligned(3, Vec3::x())).unwrap(), 1.0);
        assert!(geometric_factor(&SwarmState::aligned(1, Vec3::x())).is_err());
    }

    #[test]
    fn ties_break_to_lowest_pair() {
        let w = vec![Vec3::x(), -Vec3::x(), Vec3::x(), -Vec3::x()];
        assert_eq!(extremal_pair(&w).map(|(i, j, _)| (i, j)), Some((0, 1)));
    }

    #[test]
    fn dv_dot_zero_without_spin() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(dv_dot(&pair(Vec3::x(), Vec3::y()), &p), 0.0);
        assert_eq!(dv_dot(&SwarmState::aligned(3, Vec3::x()), &p), 0.0);
    }

    #[test]
    fn energy_examples() {
        let p = ModelParams::new(0.5, 1.0, 2.0).unwrap();
        let k = CommunicationKernel::uniform(2, 1.0).unwrap();
        let al = energy_functionals(&SwarmState::aligned(2, Vec3::x()), &k, &p).unwrap();
        assert_eq!((al.e, al.s, al.lyap), (0.0, 0.0, 0.0));
        let anti = energy_functionals(&pair(Vec3::x(), -Vec3::x()), &k, &p).unwrap();
        assert_abs_diff_eq!(anti.e, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn audits_require_constant_kernel() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let k = CommunicationKernel::Metric(crate::model::MetricPsi::cucker_smale(2.0).unwrap());
        let st = SwarmState::aligned(2, Vec3::x());
        let tr = simulate(&p, &k, &st, &IntegratorConfig::rk4(0.1, 1.0, 1), &mut []).unwrap();
        assert!(matches!(dissipation_audit(&tr, &k, &p), Err(Error::NotApplicable(_))));
        assert!(matches!(s_integral_audit(&tr, &k, &p, 0.0, 0.0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn aligned_flock_audits_are_exact() {
        let p = ModelParams::new(1.0, 2.0, 1.0).unwrap();
        let k = CommunicationKernel::uniform(3, 1.0).unwrap();
        let st = SwarmState::aligned(3, Vec3::x());
        let tr = simulate(&p, &k, &st, &IntegratorConfig::rk4(0.01, 1.0, 10), &mut []).unwrap();
        assert_eq!(dissipation_audit(&tr, &k, &p).unwrap().max_abs, 0.0);
        let s = s_integral_audit(&tr, &k, &p, 0.0, 0.0).unwrap();
        assert!(s.pass && s.cumulative.iter().all(|&c| c == 0.0));
        let ineq = inequality_audit(&tr, &k, &p, Some(0.5)).unwrap();
        assert_eq!(ineq.bas1_margin, 0.0);
        assert_eq!(ineq.bas2_margin, 0.0);
        assert!(ineq.passed());
    }

    #[test]
    fn csv_row_has_twelve_columns() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let k = CommunicationKernel::uniform(1, 1.0).unwrap();
        let st = SwarmState::aligned(1, Vec3::x());
        let r = record(&st, &st, &k, &p).unwrap();
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), 12);
        assert!(row.contains("NaN"));
        assert_eq!(DiagnosticsRecord::CSV_HEADER.split(',').count(), 12);
    }

    #[test]
    fn sig17_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-7, -12345.678901234567] {
            assert_eq!(fmt_sig17(x).parse::<f64>().unwrap(), x);
        }
    }
}
