//! Special cases of the spin model: planar phases and the zero-inertia limit.

pub mod cs;
pub mod kuramoto;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{simulate, IntegratorConfig};
use crate::model::{CommunicationKernel, ModelParams, SwarmState, Vec3};

pub use cs::{cs_flocking_check, cs_rhs, cs_simulate, h_functional, CSState, CSTrajectory};
pub use kuramoto::{
    chy_condition, embed_planar, kuramoto_rhs, kuramoto_simulate, KuramotoParams, KuramotoState,
};

/// Spins at which `ṡ = 0` for frozen velocities: `s_i = (χ/γ)(k/N) Σ_j ψ_ij v_i × v_j`.
pub fn quasi_steady_spins(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    x: &[Vec3],
    v: &[Vec3],
) -> Result<Vec<Vec3>> {
    let n = v.len();
    let probe = SwarmState {
        t: 0.0,
        x: x.to_vec(),
        v: v.to_vec(),
        s: vec![Vec3::zeros(); n],
    };
    let w = kernel.weight_matrix(&probe)?;
    let c = params.chi / params.gamma * params.k / n as f64;
    Ok((0..n)
        .map(|i| {
            let mut pull = Vec3::zeros();
            for j in 0..n {
                pull += w[i * n + j] * v[j];
            }
            let s = c * v[i].cross(&pull);
            // exact orthogonality to v_i up to rounding
            s - v[i] * s.dot(&v[i])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiLimitRow {
    pub chi: f64,
    /// `sup_t max_i |v_i^IS(t) − v_i^CS(t)|`
    pub deviation: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiLimitTable {
    pub gamma: f64,
    pub k: f64,
    pub kbar: f64,
    pub rows: Vec<ChiLimitRow>,
    /// Deviations strictly decrease as `χ` decreases (rows sorted by decreasing `χ`).
    pub strictly_decreasing: bool,
    /// Deviation of the smallest `χ` relative to the largest, divided by the `χ` ratio; values
    /// near or below 1 indicate first-order convergence.
    pub order_ratio: Option<f64>,
}

/// Compares the spin model with quasi-steady initial spins against the unit-speed model with
/// `k̄ = k/γ`, for each `χ` in `chis`.
pub fn chi_limit_study(
    chis: &[f64],
    gamma: f64,
    k: f64,
    kernel: &CommunicationKernel,
    state0: &CSState,
    config: &IntegratorConfig,
) -> Result<ChiLimitTable> {
    let kbar = k / gamma;
    if !(kbar > 0.0 && kbar.is_finite()) {
        return Err(Error::InvalidParameter("k and gamma must be > 0".into()));
    }
    let mut order: Vec<f64> = chis.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let cs = cs_simulate(kbar, kernel, state0, config)?;
    let mut rows = Vec::with_capacity(order.len());
    for &chi in &order {
        let row = match chi_run(chi, gamma, k, kernel, state0, config, &cs) {
            Ok(d) => ChiLimitRow { chi, deviation: Some(d), error: None },
            Err(e) => ChiLimitRow { chi, deviation: None, error: Some(e.to_string()) },
        };
        rows.push(row);
    }
    let devs: Option<Vec<f64>> = rows.iter().map(|r| r.deviation).collect();
    let strictly_decreasing = devs
        .as_ref()
        .is_some_and(|d| d.windows(2).all(|w| w[1] < w[0]));
    let order_ratio = match (&devs, order.first(), order.last()) {
        (Some(d), Some(&hi), Some(&lo)) if d.len() >= 2 && d[0] > 0.0 => {
            Some((d[d.len() - 1] / d[0]) / (lo / hi))
        }
        _ => None,
    };
    Ok(ChiLimitTable {
        gamma,
        k,
        kbar,
        rows,
        strictly_decreasing,
        order_ratio,
    })
}

fn chi_run(
    chi: f64,
    gamma: f64,
    k: f64,
    kernel: &CommunicationKernel,
    state0: &CSState,
    config: &IntegratorConfig,
    cs: &CSTrajectory,
) -> Result<f64> {
    let params = ModelParams::new(chi, gamma, k)?;
    let s = quasi_steady_spins(&params, kernel, &state0.x, &state0.v)?;
    let st = SwarmState::new(state0.t, state0.x.clone(), state0.v.clone(), s)?;
    let tr = simulate(&params, kernel, &st, config, &mut [])?;
    let mut worst: f64 = 0.0;
    for (a, b) in tr.samples.iter().zip(&cs.samples) {
        for (va, vb) in a.v.iter().zip(&b.v) {
            worst = worst.max((va - vb).norm());
        }
    }
    Ok(worst)
}
