//! Fixed-step classical Runge–Kutta integration of the swarm, with optional projection back onto
//! the constraint manifold and a step-halving reference oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    eval_rhs, validate_initial, CommunicationKernel, ModelParams, SwarmDerivative, SwarmState,
    TOL_SPEED,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[serde(rename = "rk4")]
    ExplicitRK4,
    #[serde(rename = "rk4_projected")]
    ExplicitRK4Projected,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    #[serde(default)]
    pub renormalize: bool,
    pub sample_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            t_end: 10.0,
            scheme: Scheme::ExplicitRK4,
            renormalize: false,
            sample_every: 10,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64, sample_every: usize) -> Self {
        IntegratorConfig {
            dt,
            t_end,
            scheme: Scheme::ExplicitRK4,
            renormalize: false,
            sample_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be >= 0, got {}",
                self.t_end
            )));
        }
        if self.t_end > 0.0 && self.t_end < self.dt * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} is shorter than one step dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps, `t_end / dt` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Spacing between stored samples.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_every as f64
    }

    /// Whether speeds are renormalised after each step.
    pub fn projects(&self) -> bool {
        self.renormalize || self.scheme == Scheme::ExplicitRK4Projected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub params: ModelParams,
    pub kernel: String,
    pub config: IntegratorConfig,
}

/// Uniformly spaced snapshots of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<SwarmState>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn first(&self) -> &SwarmState {
        &self.samples[0]
    }

    pub fn last(&self) -> &SwarmState {
        self.samples.last().expect("trajectory is never empty")
    }

    /// Sample spacing, 0 for a single-sample trajectory.
    pub fn spacing(&self) -> f64 {
        if self.samples.len() < 2 {
            0.0
        } else {
            self.samples[1].t - self.samples[0].t
        }
    }

    /// Largest sup-norm gap between corresponding samples.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.sup_distance(b))
            .fold(0.0, f64::max)
    }
}

/// Receives every stored sample as the simulation advances.
pub trait Observer {
    fn observe(&mut self, state: &SwarmState);
}

impl<F: FnMut(&SwarmState)> Observer for F {
    fn observe(&mut self, state: &SwarmState) {
        self(state)
    }
}

fn offset(state: &SwarmState, d: &SwarmDerivative, h: f64) -> SwarmState {
    let n = state.len();
    let mut out = state.clone();
    out.t += h;
    for i in 0..n {
        out.x[i] += h * d.dx[i];
        out.v[i] += h * d.dv[i];
        out.s[i] += h * d.ds[i];
    }
    out
}

fn rk4(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    state: &SwarmState,
    h: f64,
) -> Result<SwarmState> {
    let k1 = eval_rhs(params, kernel, state)?;
    let k2 = eval_rhs(params, kernel, &offset(state, &k1, 0.5 * h))?;
    let k3 = eval_rhs(params, kernel, &offset(state, &k2, 0.5 * h))?;
    let k4 = eval_rhs(params, kernel, &offset(state, &k3, h))?;
    let mut out = state.clone();
    let w = h / 6.0;
    for i in 0..state.len() {
        out.x[i] += w * (k1.dx[i] + 2.0 * k2.dx[i] + 2.0 * k3.dx[i] + k4.dx[i]);
        out.v[i] += w * (k1.dv[i] + 2.0 * k2.dv[i] + 2.0 * k3.dv[i] + k4.dv[i]);
        out.s[i] += w * (k1.ds[i] + 2.0 * k2.ds[i] + 2.0 * k3.ds[i] + k4.ds[i]);
    }
    out.t = state.t + h;
    Ok(out)
}

fn advance(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    state: &SwarmState,
    h: f64,
    project: bool,
) -> Result<SwarmState> {
    let mut next = rk4(params, kernel, state, h).map_err(|e| match e {
        Error::NonFinite(_) => Error::Divergence {
            t: state.t,
            particle: state.first_non_finite().unwrap_or(0),
        },
        other => other,
    })?;
    if project {
        next.renormalize();
    }
    if let Some(particle) = next.first_non_finite() {
        return Err(Error::Divergence { t: next.t, particle });
    }
    Ok(next)
}

/// One classical four-stage step of size `config.dt`, followed by the projection when enabled.
pub fn step(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    state: &SwarmState,
    config: &IntegratorConfig,
) -> Result<SwarmState> {
    if !(config.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", config.dt)));
    }
    advance(params, kernel, state, config.dt, config.projects())
}

fn run_fixed(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    state0: &SwarmState,
    h: f64,
    steps: usize,
    sample_every: usize,
    project: bool,
    observers: &mut [&mut dyn Observer],
) -> Result<Vec<SwarmState>> {
    let t0 = state0.t;
    let mut samples = vec![state0.clone()];
    for obs in observers.iter_mut() {
        obs.observe(state0);
    }
    let mut cur = state0.clone();
    for n in 1..=steps {
        cur = advance(params, kernel, &cur, h, project)?;
        // absolute time from the step index keeps sample times free of accumulated rounding
        cur.t = t0 + n as f64 * h;
        if n % sample_every == 0 {
            for obs in observers.iter_mut() {
                obs.observe(&cur);
            }
            samples.push(cur.clone());
        }
    }
    Ok(samples)
}

/// Integrates from `state0` to `config.t_end`, storing every `sample_every`-th step.
pub fn simulate(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    state0: &SwarmState,
    config: &IntegratorConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    params.validate()?;
    config.validate()?;
    let report = validate_initial(state0, TOL_SPEED);
    if !report.passed() {
        return Err(Error::InvalidParameter(format!(
            "initial state off the constraint manifold: speed deviation {:e}, s·v deviation {:e}",
            report.max_speed_deviation(),
            report.max_orthogonality_deviation()
        )));
    }
    let meta = TrajectoryMeta {
        params: *params,
        kernel: kernel.describe(),
        config: *config,
    };
    let steps = config.steps();
    if config.scheme == Scheme::Reference {
        let opts = ReferenceOptions {
            sample_interval: config.sample_interval(),
            initial_dt: config.dt,
            ..ReferenceOptions::default()
        };
        let mut traj = reference_solve(params, kernel, state0, config.t_end, &opts)?;
        for s in &traj.samples {
            for obs in observers.iter_mut() {
                obs.observe(s);
            }
        }
        traj.meta = meta;
        return Ok(traj);
    }
    let samples = run_fixed(
        params,
        kernel,
        state0,
        config.dt,
        steps,
        config.sample_every,
        config.projects(),
        observers,
    )?;
    Ok(Trajectory { samples, meta })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Spacing of the returned samples.
    pub sample_interval: f64,
    /// Starting step size; halved until successive runs agree.
    pub initial_dt: f64,
    /// Sup-norm agreement required between two successive halvings.
    pub tol: f64,
    /// Total step budget of the finest run.
    pub max_steps: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            sample_interval: 0.1,
            initial_dt: 1e-2,
            tol: 1e-10,
            max_steps: 1 << 23,
        }
    }
}

/// RK4 with the step halved until two successive solutions agree to `opts.tol` in sup norm
/// over all samples. The finer of the two is returned.
pub fn reference_solve(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    state0: &SwarmState,
    t_end: f64,
    opts: &ReferenceOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if !(opts.sample_interval > 0.0 && opts.initial_dt > 0.0 && t_end >= 0.0) {
        return Err(Error::InvalidParameter(
            "reference solve needs positive sample interval, step and horizon".into(),
        ));
    }
    let intervals = (t_end / opts.sample_interval).round() as usize;
    let mut substeps = ((opts.sample_interval / opts.initial_dt).round() as usize).max(1);
    let meta = |h: f64, sample_every: usize| TrajectoryMeta {
        params: *params,
        kernel: kernel.describe(),
        config: IntegratorConfig {
            dt: h,
            t_end,
            scheme: Scheme::Reference,
            renormalize: false,
            sample_every,
        },
    };
    if intervals == 0 {
        return Ok(Trajectory {
            samples: vec![state0.clone()],
            meta: meta(opts.initial_dt, substeps),
        });
    }
    let run = |m: usize| {
        let h = opts.sample_interval / m as f64;
        run_fixed(params, kernel, state0, h, intervals * m, m, false, &mut [])
    };
    let mut prev = run(substeps)?;
    let mut gap = f64::INFINITY;
    while intervals * substeps * 2 <= opts.max_steps {
        substeps *= 2;
        let cur = run(substeps)?;
        gap = prev
            .iter()
            .zip(&cur)
            .map(|(a, b)| a.sup_distance(b))
            .fold(0.0, f64::max);
        if gap <= opts.tol {
            let h = opts.sample_interval / substeps as f64;
            return Ok(Trajectory {
                samples: cur,
                meta: meta(h, substeps),
            });
        }
        prev = cur;
    }
    Err(Error::OracleBudget {
        steps: intervals * substeps,
        gap,
    })
}
