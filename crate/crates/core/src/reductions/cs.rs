//! Zero-inertia reduction: unit-speed Cucker-Smale flocking
//! `ẋ_i = v_i`, `v̇_i = (k̄/N) Σ_j ψ_ij (v_j − (v_i·v_j) v_i)`.

use serde::Serialize;

use crate::diagnostics::{extremal_pair, fmt_sig17, FD_BUDGET_FLOOR};
use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Scheme};
use crate::model::{
    project_orthogonal, CommunicationKernel, MetricPsi, SwarmState, Vec3, TOL_SPEED,
};
use crate::ode::{integrate_fixed, integrate_reference, Samples};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CSState {
    pub t: f64,
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
}

impl CSState {
    pub fn new(t: f64, x: Vec<Vec3>, v: Vec<Vec3>) -> Result<Self> {
        if x.len() != v.len() || x.is_empty() {
            return Err(Error::InvalidParameter(
                "positions and velocities must be nonempty and of equal length".into(),
            ));
        }
        if let Some(i) = v.iter().position(|vi| ((vi.norm() - 1.0).abs()) > TOL_SPEED) {
            return Err(Error::InvalidParameter(format!(
                "velocity {i} is not a unit vector (|v| = {})",
                v[i].norm()
            )));
        }
        Ok(CSState { t, x, v })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same positions and velocities with zero spins, for kernel evaluation and diagnostics.
    pub fn as_swarm(&self) -> SwarmState {
        SwarmState {
            t: self.t,
            x: self.x.clone(),
            v: self.v.clone(),
            s: vec![Vec3::zeros(); self.len()],
        }
    }

    pub fn from_swarm(s: &SwarmState) -> Result<Self> {
        CSState::new(s.t, s.x.clone(), s.v.clone())
    }

    pub fn dx(&self) -> f64 {
        extremal_pair(&self.x).map_or(0.0, |p| p.2)
    }

    pub fn dv(&self) -> f64 {
        extremal_pair(&self.v).map_or(0.0, |p| p.2)
    }

    /// `min_{i≠j} v_i · v_j` (1 for a single particle).
    pub fn geometric_factor(&self) -> f64 {
        let n = self.len();
        let mut a: f64 = 1.0;
        for i in 0..n {
            for j in (i + 1)..n {
                a = a.min(self.v[i].dot(&self.v[j]));
            }
        }
        a
    }
}

fn check_kbar(kbar: f64) -> Result<()> {
    if kbar > 0.0 && kbar.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kbar must be > 0, got {kbar}")))
    }
}

/// `(ẋ, v̇)` of the unit-speed model; `v̇_i · v_i = 0` by construction.
pub fn cs_rhs(kbar: f64, kernel: &CommunicationKernel, state: &CSState) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    check_kbar(kbar)?;
    let n = state.len();
    let w = kernel.weight_matrix(&state.as_swarm())?;
    let c = kbar / n as f64;
    let dv = (0..n)
        .map(|i| {
            let mut acc = Vec3::zeros();
            for j in 0..n {
                acc += w[i * n + j] * project_orthogonal(&state.v[i], &state.v[j]);
            }
            c * acc
        })
        .collect();
    Ok((state.v.clone(), dv))
}

fn flatten(state: &CSState) -> Vec<f64> {
    state
        .x
        .iter()
        .chain(&state.v)
        .flat_map(|p| [p.x, p.y, p.z])
        .collect()
}

fn unflatten(t: f64, y: &[f64], n: usize) -> CSState {
    let vecs: Vec<Vec3> = y.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    CSState {
        t,
        x: vecs[..n].to_vec(),
        v: vecs[n..].to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CSTrajectory {
    pub samples: Vec<CSState>,
}

impl CSTrajectory {
    pub const CSV_HEADER: &'static str = "t,Dx,Dv,A,H_plus,H_minus";

    pub fn csv_rows(&self, kbar: f64, psi: &MetricPsi) -> Result<Vec<String>> {
        let a0 = self.samples[0].geometric_factor();
        self.samples
            .iter()
            .map(|s| {
                let cols = [
                    s.t,
                    s.dx(),
                    s.dv(),
                    s.geometric_factor(),
                    h_functional(s, kbar, a0, psi, 1.0)?,
                    h_functional(s, kbar, a0, psi, -1.0)?,
                ];
                Ok(cols.iter().map(|c| fmt_sig17(*c)).collect::<Vec<_>>().join(","))
            })
            .collect()
    }
}

pub fn cs_simulate(
    kbar: f64,
    kernel: &CommunicationKernel,
    state0: &CSState,
    config: &IntegratorConfig,
) -> Result<CSTrajectory> {
    check_kbar(kbar)?;
    config.validate()?;
    let n = state0.len();
    kernel.weight_matrix(&state0.as_swarm())?;
    let f = |t: f64, y: &[f64], d: &mut [f64]| {
        let st = unflatten(t, y, n);
        // inputs are finite here; a kernel failure cannot occur after the check above
        let (dx, dv) = cs_rhs(kbar, kernel, &st).expect("kernel validated on the initial state");
        for (k, p) in dx.iter().chain(&dv).enumerate() {
            d[3 * k] = p.x;
            d[3 * k + 1] = p.y;
            d[3 * k + 2] = p.z;
        }
    };
    let y0 = flatten(state0);
    let samples: Samples = match config.scheme {
        Scheme::Reference => integrate_reference(
            &f,
            state0.t,
            &y0,
            state0.t + config.t_end,
            config.sample_interval(),
            config.dt,
            1e-11,
        )?,
        _ => integrate_fixed(&f, state0.t, &y0, config.dt, config.steps(), config.sample_every)?,
    };
    let mut out: Vec<CSState> = samples
        .t
        .iter()
        .zip(&samples.y)
        .map(|(t, y)| unflatten(*t, y, n))
        .collect();
    if config.projects() {
        for s in &mut out {
            for v in &mut s.v {
                *v /= v.norm();
            }
        }
    }
    Ok(CSTrajectory { samples: out })
}

/// `ℋ_± = D(v) ± k̄ A₀ ∫₀^{D(x)} ψ`
pub fn h_functional(state: &CSState, kbar: f64, a0: f64, psi: &MetricPsi, sign: f64) -> Result<f64> {
    Ok(state.dv() + sign * kbar * a0 * psi.integral_to(state.dx())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlockingReport {
    pub dx0: f64,
    pub dv0: f64,
    pub a0: f64,
    /// `∫_{D(x₀)}^∞ ψ`, `None` when not integrable.
    pub tail: Option<f64>,
    /// `∫₀^{D(x₀)} ψ`
    pub inner: f64,
    /// `k̄ A₀ min{tail, inner}`
    pub threshold: f64,
    pub holds: bool,
    /// `D(v₀) = 0`, at the boundary of the strict condition.
    pub boundary: bool,
    /// Solution of `k̄ A₀ ∫_{D(x₀)}^{D∞} ψ = D(v₀)` when the condition holds.
    pub d_inf: Option<f64>,
    /// `k̄ A₀ ψ(D∞)`
    pub rate: Option<f64>,
}

impl FlockingReport {
    /// `D(v₀) e^{−k̄A₀ψ(D∞)t}`
    pub fn envelope(&self, t: f64) -> Option<f64> {
        self.rate.map(|r| self.dv0 * (-r * t).exp())
    }
}

/// Scalar form of the flocking condition; returns the report without needing particle data.
pub fn cs_flocking_condition(dx0: f64, dv0: f64, a0: f64, kbar: f64, psi: &MetricPsi) -> Result<FlockingReport> {
    check_kbar(kbar)?;
    if !(a0 > 0.0) {
        return Err(Error::Hypothesis(format!("flocking condition needs A(v0) > 0, got {a0}")));
    }
    let tail = psi.tail_from(dx0)?;
    let inner = psi.integral_to(dx0)?;
    let threshold = kbar * a0 * tail.min(inner);
    let holds = dv0 > 0.0 && dv0 < threshold;
    let (d_inf, rate) = if holds {
        let d = solve_d_inf(dx0, dv0 / (kbar * a0), psi)?;
        (Some(d), Some(kbar * a0 * psi.eval(d)))
    } else {
        (None, None)
    };
    Ok(FlockingReport {
        dx0,
        dv0,
        a0,
        tail: tail.is_finite().then_some(tail),
        inner,
        threshold,
        holds,
        boundary: dv0 == 0.0,
        d_inf,
        rate,
    })
}

pub fn cs_flocking_check(state0: &CSState, kbar: f64, psi: &MetricPsi) -> Result<FlockingReport> {
    cs_flocking_condition(state0.dx(), state0.dv(), state0.geometric_factor(), kbar, psi)
}

/// Bisection for `∫_{D(x₀)}^{D∞} ψ = target` on `[D(x₀), R]`, `R` doubled until it brackets.
fn solve_d_inf(dx0: f64, target: f64, psi: &MetricPsi) -> Result<f64> {
    let base = psi.integral_to(dx0)?;
    let f = |d: f64| -> Result<f64> { Ok(psi.integral_to(d)? - base - target) };
    let mut hi = (2.0 * dx0).max(1.0);
    let mut guard = 0;
    while f(hi)? < 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Undefined("no finite D_inf bracket".into()));
        }
    }
    let mut lo = dx0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SddiAudit {
    /// `min (D(v) − |d/dt D(x)|)`
    pub dx_margin: f64,
    /// `min (−k̄ψ(D(x))D(v)A₀ − d/dt D(v))`
    pub dv_margin: f64,
    /// `min A(v(t)) − A₀`
    pub a_margin: f64,
    pub budget: f64,
    pub pass: bool,
}

/// Audits the coupled diameter inequalities along a trajectory, with the diameter derivatives of
/// the extremal pairs evaluated from the vector field.
pub fn sddi_audit(
    traj: &CSTrajectory,
    kbar: f64,
    kernel: &CommunicationKernel,
    psi: &MetricPsi,
) -> Result<SddiAudit> {
    let a0 = traj.samples[0].geometric_factor();
    if !(a0 > 0.0) {
        return Err(Error::NotApplicable("SDDI audit needs A(v0) > 0".into()));
    }
    let mut dx_margin = f64::INFINITY;
    let mut dv_margin = f64::INFINITY;
    let mut a_margin = f64::INFINITY;
    for s in &traj.samples {
        let (_, dv_dot) = cs_rhs(kbar, kernel, s)?;
        let dvd = s.dv();
        if let Some((i, j, d)) = extremal_pair(&s.x).filter(|p| p.2 > 0.0) {
            let rate = (s.x[i] - s.x[j]).dot(&(s.v[i] - s.v[j])) / d;
            dx_margin = dx_margin.min(dvd - rate.abs());
        }
        if let Some((i, j, d)) = extremal_pair(&s.v).filter(|p| p.2 > 0.0) {
            let rate = (s.v[i] - s.v[j]).dot(&(dv_dot[i] - dv_dot[j])) / d;
            dv_margin = dv_margin.min(-kbar * psi.eval(s.dx()) * d * a0 - rate);
        }
        a_margin = a_margin.min(s.geometric_factor() - a0);
    }
    let budget = FD_BUDGET_FLOOR;
    Ok(SddiAudit {
        pass: dx_margin >= -budget && dv_margin >= -budget && a_margin >= -1e-8,
        dx_margin,
        dv_margin,
        a_margin,
        budget,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlockAudit {
    pub sup_dx: f64,
    pub d_inf: f64,
    pub envelope_margin: f64,
    pub h_plus_max_increase: f64,
    pub h_minus_max_increase: f64,
    pub pass: bool,
}

/// Bounded positions, exponential envelope and non-increasing `ℋ±` along a flocking run.
pub fn flock_audit(traj: &CSTrajectory, report: &FlockingReport, kbar: f64, psi: &MetricPsi) -> Result<FlockAudit> {
    let d_inf = report
        .d_inf
        .ok_or_else(|| Error::NotApplicable("flocking condition does not hold".into()))?;
    let sup_dx = traj.samples.iter().map(CSState::dx).fold(0.0, f64::max);
    let mut envelope_margin = f64::INFINITY;
    let mut inc = [f64::NEG_INFINITY; 2];
    let mut prev: Option<[f64; 2]> = None;
    for s in &traj.samples {
        let env = report.envelope(s.t - traj.samples[0].t).unwrap_or(f64::INFINITY);
        envelope_margin = envelope_margin.min(env - s.dv());
        let h = [
            h_functional(s, kbar, report.a0, psi, 1.0)?,
            h_functional(s, kbar, report.a0, psi, -1.0)?,
        ];
        if let Some(p) = prev {
            for k in 0..2 {
                inc[k] = inc[k].max(h[k] - p[k]);
            }
        }
        prev = Some(h);
    }
    let inc = inc.map(|x| if x.is_finite() { x } else { 0.0 });
    Ok(FlockAudit {
        pass: sup_dx <= d_inf && envelope_margin >= -1e-8 && inc[0] <= 1e-8 && inc[1] <= 1e-8,
        sup_dx,
        d_inf,
        envelope_margin,
        h_plus_max_increase: inc[0],
        h_minus_max_increase: inc[1],
    })
}
