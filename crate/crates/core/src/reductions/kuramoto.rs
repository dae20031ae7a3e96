//! Planar reduction: the inertial Kuramoto model `m_i θ̈_i + γ_i θ̇_i = Ω_i + k Σ_j a_ij sin(θ_j − θ_i)`.

use serde::Serialize;

use crate::diagnostics::fmt_sig17;
use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Scheme};
use crate::model::{CommunicationKernel, ModelParams, SwarmState, Vec3};
use crate::ode::{integrate_fixed, integrate_reference, Samples};

/// Phases are continuous lifts, never folded into `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KuramotoState {
    pub t: f64,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl KuramotoState {
    pub fn new(t: f64, theta: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if theta.len() != omega.len() || theta.is_empty() {
            return Err(Error::InvalidParameter(
                "theta and omega must be nonempty and of equal length".into(),
            ));
        }
        if theta.iter().chain(&omega).any(|x| !x.is_finite()) || !t.is_finite() {
            return Err(Error::NonFinite("Kuramoto state".into()));
        }
        Ok(KuramotoState { t, theta, omega })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn d_theta(&self) -> f64 {
        spread(&self.theta)
    }

    pub fn d_omega(&self) -> f64 {
        spread(&self.omega)
    }

    /// `d/dt D_θ`: frequency gap of the (first) extremal phases.
    pub fn d_theta_dot(&self) -> f64 {
        let (imax, imin) = extremes(&self.theta);
        self.omega[imax] - self.omega[imin]
    }

    /// `max{D_θ, D_θ + m Ḋ_θ}`
    pub fn c1(&self, m: f64) -> f64 {
        let d = self.d_theta();
        d.max(d + m * self.d_theta_dot())
    }
}

fn spread(x: &[f64]) -> f64 {
    let (imax, imin) = extremes(x);
    x[imax] - x[imin]
}

fn extremes(x: &[f64]) -> (usize, usize) {
    let mut imax = 0;
    let mut imin = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[imax] {
            imax = i;
        }
        if v < x[imin] {
            imin = i;
        }
    }
    (imax, imin)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KuramotoParams {
    pub m: Vec<f64>,
    pub gamma: Vec<f64>,
    pub k: f64,
    /// Row-major `N × N` coupling weights.
    pub a: Vec<f64>,
    pub natural: Vec<f64>,
}

impl KuramotoParams {
    pub fn homogeneous(n: usize, m: f64, gamma: f64, k: f64, a: f64, natural: f64) -> Result<Self> {
        let p = KuramotoParams {
            m: vec![m; n],
            gamma: vec![gamma; n],
            k,
            a: vec![a; n * n],
            natural: vec![natural; n],
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters of the planar swarm: `m_i = χ`, `γ_i = γ`, `a_ij = ψ_ij/N`, `Ω_i = 0`.
    pub fn from_swarm(params: &ModelParams, kernel: &CommunicationKernel, n: usize) -> Result<Self> {
        params.validate()?;
        if !kernel.is_constant() {
            return Err(Error::Hypothesis(
                "planar reduction needs constant weights".into(),
            ));
        }
        let w = kernel.weight_matrix(&SwarmState::aligned(n, Vec3::x()))?;
        let p = KuramotoParams {
            m: vec![params.chi; n],
            gamma: vec![params.gamma; n],
            k: params.k,
            a: w.iter().map(|x| x / n as f64).collect(),
            natural: vec![0.0; n],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.m.len();
        if n == 0 || self.gamma.len() != n || self.natural.len() != n || self.a.len() != n * n {
            return Err(Error::InvalidParameter("inconsistent Kuramoto parameter sizes".into()));
        }
        if self.m.iter().chain(&self.gamma).any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter("inertias and dampings must be > 0".into()));
        }
        if !self.k.is_finite() || self.natural.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("coupling and natural frequencies must be finite".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (self.a[i * n + j], self.a[j * n + i]);
                if !(x >= 0.0 && x.is_finite()) || x != y {
                    return Err(Error::KernelContract(format!(
                        "coupling weights must be symmetric and nonnegative, a[{i}][{j}] = {x}, a[{j}][{i}] = {y}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_state(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::InvalidParameter(format!(
                "state has {n} oscillators, parameters {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// `(θ̇, ω̇)` with `ω̇_i = (Ω_i + k Σ_j a_ij sin(θ_j − θ_i) − γ_i ω_i)/m_i`.
pub fn kuramoto_rhs(params: &KuramotoParams, state: &KuramotoState) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check_state(state.len())?;
    let mut d = vec![0.0; 2 * state.len()];
    let y: Vec<f64> = state.theta.iter().chain(&state.omega).copied().collect();
    rhs_flat(params, &y, &mut d);
    let n = state.len();
    Ok((d[..n].to_vec(), d[n..].to_vec()))
}

fn rhs_flat(p: &KuramotoParams, y: &[f64], d: &mut [f64]) {
    let n = p.len();
    let (theta, omega) = y.split_at(n);
    for i in 0..n {
        d[i] = omega[i];
        let mut pull = 0.0;
        for j in 0..n {
            pull += p.a[i * n + j] * (theta[j] - theta[i]).sin();
        }
        d[n + i] = (p.natural[i] + p.k * pull - p.gamma[i] * omega[i]) / p.m[i];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KuramotoTrajectory {
    pub samples: Vec<KuramotoState>,
}

impl KuramotoTrajectory {
    pub const CSV_HEADER: &'static str = "t,D_theta,D_omega,C1";

    /// One row per sample; `C1` uses the common inertia when all `m_i` agree and is `NaN` otherwise.
    pub fn csv_rows(&self, params: &KuramotoParams) -> Vec<String> {
        let m = params.m[0];
        let homogeneous = params.m.iter().all(|&x| x == m);
        self.samples
            .iter()
            .map(|s| {
                let c1 = if homogeneous { s.c1(m) } else { f64::NAN };
                [s.t, s.d_theta(), s.d_omega(), c1]
                    .iter()
                    .map(|x| fmt_sig17(*x))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    }
}

fn to_states(s: Samples, n: usize) -> Vec<KuramotoState> {
    s.t.into_iter()
        .zip(s.y)
        .map(|(t, y)| KuramotoState {
            t,
            theta: y[..n].to_vec(),
            omega: y[n..].to_vec(),
        })
        .collect()
}

/// Integrates with the same stepping contract as the swarm integrator.
pub fn kuramoto_simulate(
    params: &KuramotoParams,
    state0: &KuramotoState,
    config: &IntegratorConfig,
) -> Result<KuramotoTrajectory> {
    params.validate()?;
    config.validate()?;
    params.check_state(state0.len())?;
    let n = state0.len();
    let y0: Vec<f64> = state0.theta.iter().chain(&state0.omega).copied().collect();
    let f = |_t: f64, y: &[f64], d: &mut [f64]| rhs_flat(params, y, d);
    let samples = match config.scheme {
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
    Ok(KuramotoTrajectory {
        samples: to_states(samples, n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChyReport {
    pub c1: f64,
    pub mk: f64,
    /// `C₁(0)/(4 sin C₁(0))`, the lower end of the second admissible `mk` interval.
    pub second_threshold: f64,
    pub c1_in_range: bool,
    /// Which `mk` interval holds: `"(0, 1/4)"`, `"second"` or `None`.
    pub interval: Option<String>,
    /// `C₁(0) = 0`, an aligned start at the boundary of the strict condition.
    pub boundary: bool,
    pub holds: bool,
}

/// Synchronisation condition for identical oscillators with unit damping and all-to-all
/// coupling `a_ij = 1/N`.
pub fn chy_condition(params: &KuramotoParams, state0: &KuramotoState) -> Result<ChyReport> {
    params.validate()?;
    params.check_state(state0.len())?;
    let n = params.len();
    let m = params.m[0];
    let shape_ok = params.m.iter().all(|&x| x == m)
        && params.gamma.iter().all(|&g| g == 1.0)
        && params.a.iter().all(|&a| (a - 1.0 / n as f64).abs() <= 1e-15)
        && params.natural.iter().all(|&w| w == params.natural[0]);
    if !shape_ok {
        return Err(Error::Hypothesis(
            "condition needs identical inertias, unit damping, a_ij = 1/N and identical natural frequencies".into(),
        ));
    }
    let c1 = state0.c1(m);
    let mk = m * params.k;
    let c1_in_range = c1 > 0.0 && c1 < std::f64::consts::PI;
    let second_threshold = c1 / (4.0 * c1.sin());
    let interval = if mk > 0.0 && mk < 0.25 {
        Some("(0, 1/4)".to_string())
    } else if c1_in_range && mk > second_threshold {
        Some("second".to_string())
    } else {
        None
    };
    Ok(ChyReport {
        c1,
        mk,
        second_threshold,
        c1_in_range,
        boundary: c1 == 0.0,
        holds: c1_in_range && interval.is_some(),
        interval,
    })
}

/// Lifts a phase state to the plane: `v = (cos θ, sin θ, 0)`, `s = (0, 0, χω)`.
pub fn embed_planar(
    kstate: &KuramotoState,
    params: &ModelParams,
    positions: Option<&[[f64; 2]]>,
) -> Result<SwarmState> {
    let n = kstate.len();
    let x = match positions {
        Some(p) if p.len() == n => p.iter().map(|q| Vec3::new(q[0], q[1], 0.0)).collect(),
        Some(p) => {
            return Err(Error::InvalidParameter(format!("{} positions for {n} phases", p.len())))
        }
        None => vec![Vec3::zeros(); n],
    };
    let v = kstate
        .theta
        .iter()
        .map(|th| Vec3::new(th.cos(), th.sin(), 0.0))
        .collect();
    let s = kstate
        .omega
        .iter()
        .map(|w| Vec3::new(0.0, 0.0, params.chi * w))
        .collect();
    SwarmState::new(kstate.t, x, v, s)
}

/// Continuous phase lifts of planar velocities across a sequence of states.
pub fn unwrap_phases(states: &[SwarmState]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(states.len());
    for st in states {
        let raw: Vec<f64> = st.v.iter().map(|v| v.y.atan2(v.x)).collect();
        let lifted = match out.last() {
            None => raw,
            Some(prev) => raw
                .iter()
                .zip(prev)
                .map(|(r, p)| r + std::f64::consts::TAU * ((p - r) / std::f64::consts::TAU).round())
                .collect(),
        };
        out.push(lifted);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::simulate;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn synchronized_state_is_fixed() {
        let p = KuramotoParams::homogeneous(4, 1.0, 1.0, 1.0, 0.25, 0.0).unwrap();
        let s = KuramotoState::new(0.0, vec![0.3; 4], vec![0.0; 4]).unwrap();
        let (a, b) = kuramoto_rhs(&p, &s).unwrap();
        assert!(a.iter().chain(&b).all(|x| *x == 0.0));
    }

    #[test]
    fn two_oscillators_reduce_to_pendulum() {
        let p = KuramotoParams::homogeneous(2, 1.0, 1.0, 1.0, 0.5, 0.0).unwrap();
        for (th, om) in [((0.3, -0.4), (0.1, 0.7)), ((2.0, 0.0), (-1.0, 0.5))] {
            let s = KuramotoState::new(0.0, vec![th.0, th.1], vec![om.0, om.1]).unwrap();
            let (_, dw) = kuramoto_rhs(&p, &s).unwrap();
            let phi = th.1 - th.0;
            let phidot = om.1 - om.0;
            // φ̈ + φ̇ + sin φ = 0
            assert!((dw[1] - dw[0] + phidot + phi.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn chy_examples() {
        let p = |mk: f64| KuramotoParams::homogeneous(2, 1.0, 1.0, mk, 0.5, 0.0).unwrap();
        let aligned = KuramotoState::new(0.0, vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let r = chy_condition(&p(0.2), &aligned).unwrap();
        assert!(r.boundary && !r.holds);
        let quarter = KuramotoState::new(0.0, vec![0.0, FRAC_PI_2], vec![0.0, 0.0]).unwrap();
        let r = chy_condition(&p(0.2), &quarter).unwrap();
        assert!(r.holds && r.interval.as_deref() == Some("(0, 1/4)"));
        let r = chy_condition(&p(0.5), &quarter).unwrap();
        assert!((r.second_threshold - PI / 8.0).abs() < 1e-15);
        assert!(r.holds && r.interval.as_deref() == Some("second"));
        let r = chy_condition(&p(0.3), &quarter).unwrap();
        assert!(!r.holds);
        let mut het = p(0.2);
        het.gamma[1] = 2.0;
        assert!(matches!(chy_condition(&het, &quarter), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn embedding_examples() {
        let params = ModelParams::new(0.5, 1.0, 1.0).unwrap();
        let s = embed_planar(&KuramotoState::new(0.0, vec![0.0], vec![0.0]).unwrap(), &params, None).unwrap();
        assert_eq!((s.v[0], s.s[0]), (Vec3::x(), Vec3::zeros()));
        let s = embed_planar(&KuramotoState::new(0.0, vec![FRAC_PI_2], vec![2.0]).unwrap(), &params, None).unwrap();
        assert!((s.v[0] - Vec3::y()).norm() < 1e-16);
        assert_eq!(s.s[0], Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(s.s[0].dot(&s.v[0]), 0.0);
    }

    #[test]
    fn unwrap_follows_full_turns() {
        let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let states: Vec<SwarmState> = (0..40)
            .map(|i| {
                let th = i as f64 * 0.4;
                embed_planar(&KuramotoState::new(0.0, vec![th], vec![0.0]).unwrap(), &params, None).unwrap()
            })
            .collect();
        let ph = unwrap_phases(&states);
        assert!((ph[39][0] - 39.0 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn embedded_swarm_tracks_phase_model() {
        let params = ModelParams::new(0.7, 1.2, 1.5).unwrap();
        let kernel = CommunicationKernel::constant_matrix(vec![
            vec![1.0, 0.6, 0.9],
            vec![0.6, 1.0, 0.8],
            vec![0.9, 0.8, 1.0],
        ])
        .unwrap();
        let k0 = KuramotoState::new(0.0, vec![0.1, 1.4, -0.8], vec![0.3, -0.2, 0.5]).unwrap();
        let kp = KuramotoParams::from_swarm(&params, &kernel, 3).unwrap();
        let cfg = IntegratorConfig::rk4(1e-3, 10.0, 100);
        let kt = kuramoto_simulate(&kp, &k0, &cfg).unwrap();
        let st = simulate(&params, &kernel, &embed_planar(&k0, &params, None).unwrap(), &cfg, &mut []).unwrap();
        let ph = unwrap_phases(&st.samples);
        let mut worst: f64 = 0.0;
        for (a, b) in kt.samples.iter().zip(&ph) {
            for (x, y) in a.theta.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
        for s in &st.samples {
            for i in 0..3 {
                assert!(s.v[i].z.abs() < 1e-10 && s.s[i].x.abs() < 1e-10 && s.s[i].y.abs() < 1e-10);
            }
        }
    }
}
