//! State, parameters, communication kernels and right-hand sides of the inertial spin system
//!
//! ```text
//!   ẋ_i = v_i
//!   v̇_i = (1/χ) s_i × v_i
//!   ṡ_i = (k/N) Σ_j ψ_ij v_i × v_j − (γ/χ) s_i
//! ```
//!
//! The spin equation is evaluated in the expanded form above, which coincides with
//! `v_i × [(k/N) Σ_j ψ_ij (v_j − v_i) − γ v̇_i]` whenever `|v_i| = 1` and `s_i · v_i = 0`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

pub type Vec3 = Vector3<f64>;

/// Validation tolerance for `| |v_i| − 1 |`.
pub const TOL_SPEED: f64 = 1e-9;
/// Validation tolerance for `|s_i · v_i|`.
pub const TOL_ORTH: f64 = 1e-9;

/// Moment of inertia `chi`, friction `gamma` and coupling strength `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub chi: f64,
    pub gamma: f64,
    pub k: f64,
}

impl ModelParams {
    pub fn new(chi: f64, gamma: f64, k: f64) -> Result<Self> {
        let p = ModelParams { chi, gamma, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("chi", self.chi), ("gamma", self.gamma), ("k", self.k)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Spin relaxation rate `γ/χ`.
    pub fn damping_rate(&self) -> f64 {
        self.gamma / self.chi
    }
}

/// Snapshot of the particle system at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub t: f64,
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub s: Vec<Vec3>,
}

impl SwarmState {
    pub fn new(t: f64, x: Vec<Vec3>, v: Vec<Vec3>, s: Vec<Vec3>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidParameter("swarm needs at least one particle".into()));
        }
        if x.len() != v.len() || x.len() != s.len() {
            return Err(Error::InvalidParameter(format!(
                "x, v, s lengths differ: {}, {}, {}",
                x.len(),
                v.len(),
                s.len()
            )));
        }
        Ok(SwarmState { t, x, v, s })
    }

    /// All particles share the unit direction `dir`, spins vanish, positions on a line.
    pub fn aligned(n: usize, dir: Vec3) -> Self {
        let d = dir.normalize();
        let x = (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        SwarmState {
            t: 0.0,
            x,
            v: vec![d; n],
            s: vec![Vec3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Average spin `s_c = (1/N) Σ s_i`.
    pub fn spin_center(&self) -> Vec3 {
        self.s.iter().sum::<Vec3>() / self.len() as f64
    }

    /// Applies an orthogonal map `O`: positions and velocities transform as vectors and spins as
    /// axial vectors (`det(O) · O s`), which is what keeps the flow equivariant under reflections.
    pub fn transformed(&self, o: &Matrix3<f64>) -> SwarmState {
        let det = o.determinant().signum();
        SwarmState {
            t: self.t,
            x: self.x.iter().map(|x| o * x).collect(),
            v: self.v.iter().map(|v| o * v).collect(),
            s: self.s.iter().map(|s| det * (o * s)).collect(),
        }
    }

    /// Index of the first particle with a non-finite component.
    pub fn first_non_finite(&self) -> Option<usize> {
        let bad = |w: &Vec3| !w.iter().all(|c| c.is_finite());
        (0..self.len()).find(|&i| bad(&self.x[i]) || bad(&self.v[i]) || bad(&self.s[i]))
    }

    /// Sup norm of the componentwise difference to `other` (all of x, v, s).
    pub fn sup_distance(&self, other: &SwarmState) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.len() {
            m = m
                .max((self.x[i] - other.x[i]).amax())
                .max((self.v[i] - other.v[i]).amax())
                .max((self.s[i] - other.s[i]).amax());
        }
        m
    }

    /// Velocities renormalised to the unit sphere and spins projected orthogonal to them.
    pub fn renormalize(&mut self) {
        for (v, s) in self.v.iter_mut().zip(self.s.iter_mut()) {
            *v = v.normalize();
            *s -= s.dot(v) * *v;
        }
    }
}

/// Time derivatives of a [`SwarmState`].
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmDerivative {
    pub dx: Vec<Vec3>,
    pub dv: Vec<Vec3>,
    pub ds: Vec<Vec3>,
}

/// Metric communication rate `ψ(r)`: positive, bounded by `ψ(0)` and nonincreasing.
#[derive(Clone)]
pub enum MetricPsi {
    /// `ψ(r) = (1 + r²)^(−β/2)`.
    CuckerSmale { beta: f64 },
    /// Monotone samples `(r_k, ψ_k)` with linear interpolation; constant beyond both ends.
    Tabulated { r: Vec<f64>, psi: Vec<f64> },
    /// Arbitrary closed form. `psi_max` is the declared bound `ψ(0)`.
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        psi_max: f64,
        label: String,
    },
}

impl fmt::Debug for MetricPsi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricPsi::CuckerSmale { beta } => write!(f, "CuckerSmale {{ beta: {beta} }}"),
            MetricPsi::Tabulated { r, .. } => write!(f, "Tabulated {{ {} samples }}", r.len()),
            MetricPsi::Custom { label, psi_max, .. } => {
                write!(f, "Custom {{ {label}, psi_max: {psi_max} }}")
            }
        }
    }
}

impl MetricPsi {
    pub fn cucker_smale(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        Ok(MetricPsi::CuckerSmale { beta })
    }

    /// Tabulated rate; the monotonicity and positivity constraints are checked here.
    pub fn tabulated(r: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if r.len() != psi.len() || r.len() < 2 {
            return Err(Error::KernelContract(
                "tabulated psi needs at least two (r, psi) samples of equal length".into(),
            ));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) || r[0] < 0.0 {
            return Err(Error::KernelContract(
                "tabulated r must be nonnegative and strictly increasing".into(),
            ));
        }
        if psi.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::KernelContract("tabulated psi must be positive".into()));
        }
        if psi.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::KernelContract("tabulated psi must be nonincreasing".into()));
        }
        Ok(MetricPsi::Tabulated { r, psi })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            MetricPsi::CuckerSmale { beta } => (1.0 + r * r).powf(-0.5 * beta),
            MetricPsi::Tabulated { r: rs, psi } => {
                if r <= rs[0] {
                    return psi[0];
                }
                let last = rs.len() - 1;
                if r >= rs[last] {
                    return psi[last];
                }
                let k = rs.partition_point(|&q| q <= r) - 1;
                let w = (r - rs[k]) / (rs[k + 1] - rs[k]);
                psi[k] + w * (psi[k + 1] - psi[k])
            }
            MetricPsi::Custom { f, .. } => f(r),
        }
    }

    /// Upper bound `ψ_M = ψ(0)`.
    pub fn psi_max(&self) -> f64 {
        match self {
            MetricPsi::Custom { psi_max, .. } => *psi_max,
            _ => self.eval(0.0),
        }
    }

    /// `∫₀^r ψ(s) ds`.
    pub fn integral_to(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        match self {
            MetricPsi::CuckerSmale { beta } if *beta == 2.0 => Ok(r.atan()),
            MetricPsi::CuckerSmale { beta } if *beta == 1.0 => Ok(r.asinh()),
            MetricPsi::Tabulated { r: rs, .. } => {
                // exact for the piecewise-linear interpolant
                let mut acc = 0.0;
                let mut lo = 0.0;
                let mut plo = self.eval(0.0);
                let knots = rs.iter().copied().filter(|&q| q > 0.0 && q < r);
                for q in knots.chain(std::iter::once(r)) {
                    let pq = self.eval(q);
                    acc += 0.5 * (plo + pq) * (q - lo);
                    lo = q;
                    plo = pq;
                }
                Ok(acc)
            }
            _ => adaptive_simpson(|s| self.eval(s), 0.0, r, 1e-12, 1e-300),
        }
    }

    /// `∫_r^∞ ψ(s) ds`, `+∞` when the tail is not integrable.
    pub fn tail_from(&self, r: f64) -> Result<f64> {
        match self {
            MetricPsi::CuckerSmale { beta } if *beta <= 1.0 => Ok(f64::INFINITY),
            MetricPsi::CuckerSmale { beta } if *beta == 2.0 => {
                Ok(std::f64::consts::FRAC_PI_2 - r.max(0.0).atan())
            }
            MetricPsi::CuckerSmale { beta } => {
                // ∫₀^∞ (1+s²)^(−β/2) ds = (√π/2) Γ((β−1)/2) / Γ(β/2)
                use statrs::function::gamma::gamma;
                let total = 0.5 * std::f64::consts::PI.sqrt() * gamma(0.5 * (beta - 1.0))
                    / gamma(0.5 * beta);
                Ok(total - self.integral_to(r)?)
            }
            MetricPsi::Tabulated { psi, .. } => {
                if *psi.last().unwrap() > 0.0 {
                    Ok(f64::INFINITY)
                } else {
                    Ok(0.0)
                }
            }
            MetricPsi::Custom { .. } => Err(Error::Undefined(
                "tail integral of a custom metric rate is not available".into(),
            )),
        }
    }
}

/// Time-varying weights with declared bounds `ψ_m ≤ ψ_ij(t) ≤ ψ_M`.
#[derive(Clone)]
pub struct TimeVaryingWeights {
    pub sampler: Arc<dyn Fn(f64, usize, usize) -> f64 + Send + Sync>,
    pub psi_m: f64,
    pub psi_max: f64,
    pub label: String,
}

impl fmt::Debug for TimeVaryingWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TimeVaryingWeights {{ {}, psi_m: {}, psi_M: {} }}",
            self.label, self.psi_m, self.psi_max
        )
    }
}

/// Communication weights `ψ_ij`.
#[derive(Debug, Clone)]
pub enum CommunicationKernel {
    /// Constant symmetric nonnegative matrix, row-major `n × n`.
    ConstantMatrix { n: usize, w: Vec<f64> },
    /// `ψ_ij = ψ(|x_i − x_j|)`.
    Metric(MetricPsi),
    /// `ψ_ij = p_i p_j`.
    Multiplicative(Vec<f64>),
    TimeVaryingBounded(TimeVaryingWeights),
}

impl CommunicationKernel {
    /// Validated constant matrix.
    pub fn constant_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::KernelContract("weight matrix must be square and non-empty".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let w = rows[i][j];
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::KernelContract(format!(
                        "weight ({i}, {j}) = {w} is negative or non-finite"
                    )));
                }
                if w != rows[j][i] {
                    return Err(Error::KernelContract(format!(
                        "weight matrix is not symmetric at ({i}, {j}): {w} vs {}",
                        rows[j][i]
                    )));
                }
            }
        }
        Ok(CommunicationKernel::ConstantMatrix {
            n,
            w: rows.into_iter().flatten().collect(),
        })
    }

    /// `ψ_ij ≡ value` for `n` particles.
    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::constant_matrix(vec![vec![value; n]; n])
    }

    pub fn multiplicative(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&q| !(q.is_finite() && q > 0.0)) {
            return Err(Error::KernelContract("multiplicative factors must be positive".into()));
        }
        Ok(CommunicationKernel::Multiplicative(p))
    }

    pub fn time_varying(
        sampler: Arc<dyn Fn(f64, usize, usize) -> f64 + Send + Sync>,
        psi_m: f64,
        psi_max: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(psi_m > 0.0 && psi_m <= psi_max && psi_max.is_finite()) {
            return Err(Error::KernelContract(format!(
                "need 0 < psi_m <= psi_M, got {psi_m}, {psi_max}"
            )));
        }
        Ok(CommunicationKernel::TimeVaryingBounded(TimeVaryingWeights {
            sampler,
            psi_m,
            psi_max,
            label: label.into(),
        }))
    }

    /// Particle count the kernel is tied to, if any.
    pub fn size(&self) -> Option<usize> {
        match self {
            CommunicationKernel::ConstantMatrix { n, .. } => Some(*n),
            CommunicationKernel::Multiplicative(p) => Some(p.len()),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(
            self,
            CommunicationKernel::ConstantMatrix { .. } | CommunicationKernel::Multiplicative(_)
        )
    }

    /// Global weight bounds `(ψ_m, ψ_M)`. Metric kernels only have an upper bound, so
    /// `ψ_m = 0` is reported for them.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            CommunicationKernel::ConstantMatrix { w, .. } => {
                let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = w.iter().copied().fold(0.0, f64::max);
                (lo, hi)
            }
            CommunicationKernel::Multiplicative(p) => {
                let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = p.iter().copied().fold(0.0, f64::max);
                (lo * lo, hi * hi)
            }
            CommunicationKernel::Metric(psi) => (0.0, psi.psi_max()),
            CommunicationKernel::TimeVaryingBounded(tv) => (tv.psi_m, tv.psi_max),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CommunicationKernel::ConstantMatrix { n, .. } => {
                let (lo, hi) = self.bounds();
                format!("constant matrix {n}x{n}, entries in [{lo}, {hi}]")
            }
            CommunicationKernel::Metric(psi) => format!("metric {psi:?}"),
            CommunicationKernel::Multiplicative(p) => format!("multiplicative p = {p:?}"),
            CommunicationKernel::TimeVaryingBounded(tv) => format!("{tv:?}"),
        }
    }

    fn check_size(&self, n: usize) -> Result<()> {
        match self.size() {
            Some(m) if m != n => Err(Error::KernelContract(format!(
                "kernel sized for {m} particles applied to a swarm of {n}"
            ))),
            _ => Ok(()),
        }
    }

    /// `ψ_ij` at `state`; indices are assumed in range.
    fn weight_unchecked(&self, i: usize, j: usize, state: &SwarmState) -> Result<f64> {
        let w = match self {
            CommunicationKernel::ConstantMatrix { n, w } => w[i * n + j],
            CommunicationKernel::Multiplicative(p) => p[i] * p[j],
            CommunicationKernel::Metric(psi) => {
                let w = psi.eval((state.x[i] - state.x[j]).norm());
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::KernelContract(format!(
                        "metric psi returned {w} for pair ({i}, {j})"
                    )));
                }
                w
            }
            CommunicationKernel::TimeVaryingBounded(tv) => {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                let w = (tv.sampler)(state.t, a, b);
                if !(w >= tv.psi_m && w <= tv.psi_max) {
                    return Err(Error::KernelContract(format!(
                        "sampled weight {w} for ({a}, {b}) at t = {} outside [{}, {}]",
                        state.t, tv.psi_m, tv.psi_max
                    )));
                }
                w
            }
        };
        Ok(w)
    }

    /// Full `N × N` weight matrix at `state`, row-major.
    pub fn weight_matrix(&self, state: &SwarmState) -> Result<Vec<f64>> {
        let n = state.len();
        self.check_size(n)?;
        if let CommunicationKernel::ConstantMatrix { w, .. } = self {
            return Ok(w.clone());
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let w = self.weight_unchecked(i, j, state)?;
                out[i * n + j] = w;
                out[j * n + i] = w;
            }
        }
        Ok(out)
    }
}

/// Weight `ψ_ij` of the pair `(i, j)` at `state`.
pub fn kernel_weight(
    kernel: &CommunicationKernel,
    i: usize,
    j: usize,
    state: &SwarmState,
) -> Result<f64> {
    let n = state.len();
    if i >= n || j >= n {
        return Err(Error::IndexOutOfRange { i, j, n });
    }
    kernel.check_size(n)?;
    kernel.weight_unchecked(i, j, state)
}

fn check_finite(state: &SwarmState) -> Result<()> {
    if !state.t.is_finite() {
        return Err(Error::NonFinite(format!("time {}", state.t)));
    }
    match state.first_non_finite() {
        Some(i) => Err(Error::NonFinite(format!("particle {i} at t = {}", state.t))),
        None => Ok(()),
    }
}

/// First-order right-hand side.
pub fn eval_rhs(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    state: &SwarmState,
) -> Result<SwarmDerivative> {
    check_finite(state)?;
    let n = state.len();
    let w = kernel.weight_matrix(state)?;
    let coupling = params.k / n as f64;
    let relax = params.gamma / params.chi;
    let inv_chi = 1.0 / params.chi;

    let dx = state.v.clone();
    let mut dv = Vec::with_capacity(n);
    let mut ds = Vec::with_capacity(n);
    for i in 0..n {
        let vi = &state.v[i];
        dv.push(inv_chi * state.s[i].cross(vi));
        // Σ_j ψ_ij v_i × v_j = v_i × Σ_j ψ_ij v_j, summed in index order
        let mut pull = Vec3::zeros();
        for j in 0..n {
            pull += w[i * n + j] * state.v[j];
        }
        ds.push(coupling * vi.cross(&pull) - relax * state.s[i]);
    }
    Ok(SwarmDerivative { dx, dv, ds })
}

/// Orthogonal projection `Γ(v_i, v_j) = v_j − (v_i · v_j) v_i`.
pub fn project_orthogonal(vi: &Vec3, vj: &Vec3) -> Vec3 {
    vj - vi.dot(vj) * vi
}

/// Velocity acceleration from the second-order form
/// `χ v̈_i + γ v̇_i + χ |v̇_i|² v_i = (k/N) Σ_j ψ_ij Γ(v_i, v_j)` with `v̇_i = s_i × v_i / χ`.
pub fn eval_accel_second_order(
    params: &ModelParams,
    kernel: &CommunicationKernel,
    state: &SwarmState,
) -> Result<Vec<Vec3>> {
    check_finite(state)?;
    let n = state.len();
    let w = kernel.weight_matrix(state)?;
    let coupling = params.k / n as f64;
    let mut acc = Vec::with_capacity(n);
    for i in 0..n {
        let vi = &state.v[i];
        let vdot = state.s[i].cross(vi) / params.chi;
        let mut drive = Vec3::zeros();
        for j in 0..n {
            drive += w[i * n + j] * project_orthogonal(vi, &state.v[j]);
        }
        let rhs = coupling * drive - params.gamma * vdot - params.chi * vdot.norm_squared() * vi;
        acc.push(rhs / params.chi);
    }
    Ok(acc)
}

/// Per-particle deviations from the admissible initial manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tol: f64,
    pub speed_deviation: Vec<f64>,
    pub orthogonality_deviation: Vec<f64>,
    pub speed_violations: Vec<usize>,
    pub orthogonality_violations: Vec<usize>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.speed_violations.is_empty() && self.orthogonality_violations.is_empty()
    }

    pub fn max_speed_deviation(&self) -> f64 {
        self.speed_deviation.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_orthogonality_deviation(&self) -> f64 {
        self.orthogonality_deviation.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks `|v_i| = 1` and `s_i · v_i = 0` within `tol`.
pub fn validate_initial(state: &SwarmState, tol: f64) -> ValidationReport {
    let speed_deviation: Vec<f64> = state.v.iter().map(|v| (v.norm() - 1.0).abs()).collect();
    let orthogonality_deviation: Vec<f64> = state
        .v
        .iter()
        .zip(&state.s)
        .map(|(v, s)| s.dot(v).abs())
        .collect();
    let over = |d: &[f64]| {
        d.iter()
            .enumerate()
            .filter(|(_, &e)| !(e <= tol))
            .map(|(i, _)| i)
            .collect()
    };
    ValidationReport {
        tol,
        speed_violations: over(&speed_deviation),
        orthogonality_violations: over(&orthogonality_deviation),
        speed_deviation,
        orthogonality_deviation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> ModelParams {
        ModelParams::new(0.7, 1.3, 2.1).unwrap()
    }

    #[test]
    fn params_reject_nonpositive() {
        assert!(ModelParams::new(1.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn constant_kernel_weight() {
        let k = CommunicationKernel::uniform(3, 1.0).unwrap();
        let st = SwarmState::aligned(3, Vec3::x());
        assert_eq!(kernel_weight(&k, 0, 2, &st).unwrap(), 1.0);
    }

    #[test]
    fn metric_kernel_example() {
        let k = CommunicationKernel::Metric(MetricPsi::cucker_smale(2.0).unwrap());
        let mut st = SwarmState::aligned(2, Vec3::x());
        st.x[0] = Vec3::zeros();
        st.x[1] = Vec3::new(0.0, 1.0, 0.0);
        assert_abs_diff_eq!(kernel_weight(&k, 0, 1, &st).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(
            kernel_weight(&k, 0, 1, &st).unwrap(),
            kernel_weight(&k, 1, 0, &st).unwrap()
        );
    }

    #[test]
    fn multiplicative_kernel_example() {
        let k = CommunicationKernel::multiplicative(vec![2.0, 3.0]).unwrap();
        let st = SwarmState::aligned(2, Vec3::x());
        assert_eq!(kernel_weight(&k, 0, 1, &st).unwrap(), 6.0);
    }

    #[test]
    fn kernel_index_out_of_range() {
        let k = CommunicationKernel::uniform(2, 1.0).unwrap();
        let st = SwarmState::aligned(2, Vec3::x());
        assert!(matches!(
            kernel_weight(&k, 0, 2, &st),
            Err(Error::IndexOutOfRange { i: 0, j: 2, n: 2 })
        ));
    }

    #[test]
    fn negative_metric_is_contract_violation() {
        let psi = MetricPsi::Custom {
            f: Arc::new(|r| 1.0 - r),
            psi_max: 1.0,
            label: "1-r".into(),
        };
        let k = CommunicationKernel::Metric(psi);
        let mut st = SwarmState::aligned(2, Vec3::x());
        st.x[1] = Vec3::new(3.0, 0.0, 0.0);
        assert!(matches!(kernel_weight(&k, 0, 1, &st), Err(Error::KernelContract(_))));
    }

    #[test]
    fn nonsymmetric_matrix_rejected() {
        let r = CommunicationKernel::constant_matrix(vec![vec![1.0, 2.0], vec![1.0, 1.0]]);
        assert!(matches!(r, Err(Error::KernelContract(_))));
    }

    #[test]
    fn tabulated_psi_interpolates_and_checks_monotone() {
        let psi = MetricPsi::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25]).unwrap();
        assert_abs_diff_eq!(psi.eval(0.5), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.eval(10.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.integral_to(2.0).unwrap(), 0.75 + 0.375, epsilon = 1e-14);
        assert!(MetricPsi::tabulated(vec![0.0, 1.0], vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn metric_integrals() {
        let cs2 = MetricPsi::cucker_smale(2.0).unwrap();
        assert_abs_diff_eq!(cs2.integral_to(1.0).unwrap(), std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        // β = 3: ∫₀^∞ (1+s²)^(-3/2) ds = 1 and ∫₀^r = r / √(1+r²)
        let cs3 = MetricPsi::cucker_smale(3.0).unwrap();
        let r: f64 = 1.7;
        assert_abs_diff_eq!(cs3.integral_to(r).unwrap(), r / (1.0 + r * r).sqrt(), epsilon = 1e-11);
        assert_abs_diff_eq!(cs3.tail_from(r).unwrap(), 1.0 - r / (1.0 + r * r).sqrt(), epsilon = 1e-10);
        assert!(MetricPsi::cucker_smale(1.0).unwrap().tail_from(0.0).unwrap().is_infinite());
    }

    #[test]
    fn aligned_flock_is_fixed_point() {
        let st = SwarmState::aligned(5, Vec3::new(1.0, 2.0, 2.0));
        let k = CommunicationKernel::uniform(5, 0.8).unwrap();
        let d = eval_rhs(&params(), &k, &st).unwrap();
        for i in 0..5 {
            assert_eq!(d.dx[i], st.v[i]);
            assert_abs_diff_eq!(d.dv[i].norm(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(d.ds[i].norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_particle_rhs_by_hand() {
        let sigma = 0.3;
        let p = params();
        let st = SwarmState::new(
            0.0,
            vec![Vec3::zeros()],
            vec![Vec3::x()],
            vec![Vec3::new(0.0, 0.0, sigma)],
        )
        .unwrap();
        let k = CommunicationKernel::uniform(1, 1.0).unwrap();
        let d = eval_rhs(&p, &k, &st).unwrap();
        assert_abs_diff_eq!(d.dv[0], Vec3::new(0.0, sigma / p.chi, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(
            d.ds[0],
            Vec3::new(0.0, 0.0, -p.gamma * sigma / p.chi),
            epsilon = 1e-15
        );
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut st = SwarmState::aligned(2, Vec3::x());
        st.s[1].y = f64::NAN;
        let k = CommunicationKernel::uniform(2, 1.0).unwrap();
        assert!(matches!(eval_rhs(&params(), &k, &st), Err(Error::NonFinite(_))));
    }

    #[test]
    fn second_order_vanishes_on_aligned() {
        let st = SwarmState::aligned(2, Vec3::y());
        let k = CommunicationKernel::uniform(2, 1.0).unwrap();
        for a in eval_accel_second_order(&params(), &k, &st).unwrap() {
            assert_abs_diff_eq!(a.norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn projection_examples() {
        let e1 = Vec3::x();
        assert_eq!(project_orthogonal(&e1, &e1), Vec3::zeros());
        assert_eq!(project_orthogonal(&e1, &Vec3::y()), Vec3::y());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let vj = Vec3::new(h, h, 0.0);
        let g = project_orthogonal(&e1, &vj);
        assert_abs_diff_eq!(g.dot(&e1), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(g.norm_squared(), 1.0 - e1.dot(&vj).powi(2), epsilon = 1e-15);
    }

    #[test]
    fn validation_examples() {
        let ok = SwarmState::new(0.0, vec![Vec3::zeros()], vec![Vec3::x()], vec![Vec3::z()]).unwrap();
        assert!(validate_initial(&ok, TOL_SPEED).passed());

        let fast = SwarmState::new(0.0, vec![Vec3::zeros()], vec![2.0 * Vec3::x()], vec![Vec3::zeros()]).unwrap();
        let r = validate_initial(&fast, TOL_SPEED);
        assert_eq!(r.speed_violations, vec![0]);
        assert_abs_diff_eq!(r.max_speed_deviation(), 1.0);

        let par = SwarmState::new(0.0, vec![Vec3::zeros()], vec![Vec3::x()], vec![Vec3::x()]).unwrap();
        let r = validate_initial(&par, TOL_ORTH);
        assert_eq!(r.orthogonality_violations, vec![0]);
        assert_abs_diff_eq!(r.max_orthogonality_deviation(), 1.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(SwarmState::new(0.0, vec![Vec3::zeros()], vec![], vec![]).is_err());
        assert!(SwarmState::new(0.0, vec![], vec![], vec![]).is_err());
    }
}
