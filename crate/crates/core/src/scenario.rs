//! JSON scenario documents: model, parameters, weights, initial data, integrator and checks.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gronwall::{Gron1Problem, Gron2Problem};
use crate::integrator::IntegratorConfig;
use crate::model::{CommunicationKernel, MetricPsi, ModelParams, SwarmState, Vec3};
use crate::reductions::{CSState, KuramotoParams, KuramotoState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Is,
    Kuramoto,
    Cs,
    Gronwall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Conservation,
    Dissipation,
    SIntegral,
    Inequality,
    Invariance,
    Thm1,
    Thm2,
    Ha,
    Chy,
    Embedding,
    CsFlock,
    Sddi,
    ChiLimit,
    GronwallSuite,
}

impl CheckId {
    pub fn name(&self) -> &'static str {
        match self {
            CheckId::Conservation => "conservation",
            CheckId::Dissipation => "dissipation",
            CheckId::SIntegral => "s_integral",
            CheckId::Inequality => "inequality",
            CheckId::Invariance => "invariance",
            CheckId::Thm1 => "thm1",
            CheckId::Thm2 => "thm2",
            CheckId::Ha => "ha",
            CheckId::Chy => "chy",
            CheckId::Embedding => "embedding",
            CheckId::CsFlock => "cs_flock",
            CheckId::Sddi => "sddi",
            CheckId::ChiLimit => "chi_limit",
            CheckId::GronwallSuite => "gronwall_suite",
        }
    }

    pub fn model(&self) -> ModelKind {
        match self {
            CheckId::Chy | CheckId::Embedding => ModelKind::Kuramoto,
            CheckId::CsFlock | CheckId::Sddi | CheckId::ChiLimit => ModelKind::Cs,
            CheckId::GronwallSuite => ModelKind::Gronwall,
            _ => ModelKind::Is,
        }
    }

    fn needs_delta0(&self) -> bool {
        matches!(self, CheckId::Invariance | CheckId::Thm1 | CheckId::Thm2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Every weight equal to `value`.
    Constant { value: f64 },
    Matrix { rows: Vec<Vec<f64>> },
    /// `(1 + r²)^(−β/2)` when `beta` is given, otherwise a monotone table `(r, psi)`.
    Metric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psi: Option<Vec<f64>>,
    },
    Multiplicative { p: Vec<f64> },
    /// `ψ_ij(t) = ψ_m + (ψ_M − ψ_m)(1 + sin(freq·t + φ_ij))/2`, with symmetric phases `φ_ij`
    /// drawn from `seed`.
    TimeVarying {
        psi_m: f64,
        #[serde(rename = "psi_M")]
        psi_max: f64,
        freq: f64,
        seed: u64,
    },
}

impl KernelSpec {
    pub fn build(&self, n: usize) -> Result<CommunicationKernel> {
        let k = match self {
            KernelSpec::Constant { value } => CommunicationKernel::uniform(n, *value),
            KernelSpec::Matrix { rows } => CommunicationKernel::constant_matrix(rows.clone()),
            KernelSpec::Metric { beta, r, psi } => match (beta, r, psi) {
                (Some(b), None, None) => Ok(CommunicationKernel::Metric(MetricPsi::cucker_smale(*b)?)),
                (None, Some(r), Some(p)) => {
                    Ok(CommunicationKernel::Metric(MetricPsi::tabulated(r.clone(), p.clone())?))
                }
                _ => Err(Error::scenario("kernel", "metric kernel needs either beta or both r and psi")),
            },
            KernelSpec::Multiplicative { p } => CommunicationKernel::multiplicative(p.clone()),
            KernelSpec::TimeVarying { psi_m, psi_max, freq, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut phase = vec![0.0; n * n];
                for i in 0..n {
                    for j in i..n {
                        let p = rng.random::<f64>() * TAU;
                        phase[i * n + j] = p;
                        phase[j * n + i] = p;
                    }
                }
                let (lo, hi, w) = (*psi_m, *psi_max, *freq);
                let sampler = move |t: f64, i: usize, j: usize| {
                    lo + (hi - lo) * 0.5 * (1.0 + (w * t + phase[i * n + j]).sin())
                };
                CommunicationKernel::time_varying(Arc::new(sampler), lo, hi, "oscillating")
            }
        }
        .map_err(|e| relabel(e, "kernel"))?;
        if let Some(m) = k.size() {
            if m != n {
                return Err(Error::scenario("kernel", format!("kernel is {m} x {m} for {n} particles")));
            }
        }
        Ok(k)
    }

    pub fn metric_psi(&self) -> Result<MetricPsi> {
        match self.build(1)? {
            CommunicationKernel::Metric(psi) => Ok(psi),
            _ => Err(Error::scenario("kernel.kind", "a metric kernel is required")),
        }
    }
}

fn relabel(e: Error, path: &str) -> Error {
    match e {
        Error::Scenario { .. } => e,
        other => Error::scenario(path, other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Explicit {
        x: Vec<[f64; 3]>,
        v: Vec<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<Vec<[f64; 3]>>,
    },
    /// Unit velocities in a cone of half-angle `cone_half_angle` about the z axis, spins with
    /// components uniform in `[−spin_scale, spin_scale]` projected orthogonal to the velocity,
    /// positions uniform in `[0, box]³`.
    Generated {
        n: usize,
        cone_half_angle: f64,
        #[serde(default)]
        spin_scale: f64,
        #[serde(rename = "box", default = "unit")]
        box_size: f64,
        seed: u64,
    },
    Phases { theta: Vec<f64>, omega: Vec<f64> },
}

fn unit() -> f64 {
    1.0
}

impl InitialSpec {
    pub fn len(&self) -> usize {
        match self {
            InitialSpec::Explicit { v, .. } => v.len(),
            InitialSpec::Generated { n, .. } => *n,
            InitialSpec::Phases { theta, .. } => theta.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn swarm_state(&self) -> Result<SwarmState> {
        match self {
            InitialSpec::Explicit { x, v, s } => {
                let to = |w: &Vec<[f64; 3]>| w.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect::<Vec<_>>();
                let s = match s {
                    Some(s) => to(s),
                    None => vec![Vec3::zeros(); v.len()],
                };
                SwarmState::new(0.0, to(x), to(v), s).map_err(|e| relabel(e, "initial"))
            }
            InitialSpec::Generated { n, cone_half_angle, spin_scale, box_size, seed } => {
                if *n == 0 {
                    return Err(Error::scenario("initial.n", "need at least one particle"));
                }
                if !(*cone_half_angle >= 0.0 && *cone_half_angle < FRAC_PI_2) {
                    return Err(Error::scenario("initial.cone_half_angle", "must lie in [0, pi/2)"));
                }
                if !(*spin_scale >= 0.0 && spin_scale.is_finite()) || !(*box_size >= 0.0 && box_size.is_finite()) {
                    return Err(Error::scenario("initial", "spin_scale and box must be finite and >= 0"));
                }
                Ok(generate(*n, *cone_half_angle, *spin_scale, *box_size, *seed))
            }
            InitialSpec::Phases { .. } => Err(Error::scenario("initial.kind", "phase data only applies to the kuramoto model")),
        }
    }

    pub fn phases(&self) -> Result<KuramotoState> {
        match self {
            InitialSpec::Phases { theta, omega } => {
                KuramotoState::new(0.0, theta.clone(), omega.clone()).map_err(|e| relabel(e, "initial"))
            }
            _ => Err(Error::scenario("initial.kind", "the kuramoto model needs phase data")),
        }
    }

    /// Replaces the generator seed; explicit data is left untouched.
    pub fn reseed(&mut self, new_seed: u64) {
        if let InitialSpec::Generated { seed, .. } = self {
            *seed = new_seed;
        }
    }
}

fn generate(n: usize, angle: f64, spin_scale: f64, box_size: f64, seed: u64) -> SwarmState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cos_a = angle.cos();
    let mut x = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for _ in 0..n {
        let c = cos_a + (1.0 - cos_a) * rng.random::<f64>();
        let phi = TAU * rng.random::<f64>();
        let sn = (1.0 - c * c).max(0.0).sqrt();
        let vi = Vec3::new(sn * phi.cos(), sn * phi.sin(), c);
        let raw = Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ) * spin_scale;
        x.push(Vec3::new(rng.random(), rng.random(), rng.random()) * box_size);
        s.push(raw - vi * raw.dot(&vi));
        v.push(vi);
    }
    SwarmState { t: 0.0, x, v, s }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAgent {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerAgent {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>> {
        match self {
            PerAgent::Uniform(x) => Ok(vec![*x; n]),
            PerAgent::List(v) if v.len() == n => Ok(v.clone()),
            PerAgent::List(v) => Err(Error::scenario(path, format!("{} entries for {n} oscillators", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coupling {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KuramotoSpec {
    pub m: PerAgent,
    pub gamma: PerAgent,
    pub k: f64,
    /// Defaults to all-to-all `1/N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Coupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub natural: Option<PerAgent>,
}

impl KuramotoSpec {
    pub fn build(&self, n: usize) -> Result<KuramotoParams> {
        let a = match &self.a {
            None => vec![1.0 / n as f64; n * n],
            Some(Coupling::Uniform(x)) => vec![*x; n * n],
            Some(Coupling::Matrix(rows)) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::scenario("kuramoto.a", format!("coupling must be {n} x {n}")));
                }
                rows.concat()
            }
        };
        let p = KuramotoParams {
            m: self.m.expand(n, "kuramoto.m")?,
            gamma: self.gamma.expand(n, "kuramoto.gamma")?,
            k: self.k,
            a,
            natural: match &self.natural {
                Some(w) => w.expand(n, "kuramoto.natural")?,
                None => vec![0.0; n],
            },
        };
        p.validate().map_err(|e| relabel(e, "kuramoto"))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default = "fifty")]
    pub count: usize,
    pub seed: u64,
    #[serde(default = "twenty")]
    pub t_end: f64,
}

fn fifty() -> usize {
    50
}

fn twenty() -> f64 {
    20.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GronwallSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gron1: Vec<Gron1Problem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gron2: Vec<Gron2Problem>,
}

impl PartialEq for GronwallSpec {
    fn eq(&self, other: &Self) -> bool {
        // forcing closures are not comparable; compare through the serialized form
        serde_json::to_value(self).ok() == serde_json::to_value(other).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub chis: Vec<f64>,
    pub gamma: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOptions {
    /// Window `[t0, t1]` of the decay-rate fit; defaults to the second half of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default = "angle_tol")]
    pub angle_tol: f64,
    #[serde(default = "embedding_tol")]
    pub embedding_tol: f64,
}

fn angle_tol() -> f64 {
    1e-2
}

fn embedding_tol() -> f64 {
    1e-5
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            fit_window: None,
            angle_tol: angle_tol(),
            embedding_tol: embedding_tol(),
        }
    }
}

fn is_default_options(o: &CheckOptions) -> bool {
    *o == CheckOptions::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub checks: Vec<CheckId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    /// Coupling of the unit-speed model; defaults to `k/γ` from `params`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kuramoto: Option<KuramotoSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gronwall: Option<GronwallSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySpec>,
    #[serde(default, skip_serializing_if = "is_default_options")]
    pub options: CheckOptions,
}

impl Scenario {
    /// Parses and validates a scenario document; schema errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = match e.path().to_string() {
                p if p == "?" || p == "." => "document".to_string(),
                p => p,
            };
            Error::scenario(path, e.into_inner().to_string())
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> Result<String> {
        let canon = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&canon)))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.params {
            for (name, v) in [("chi", p.chi), ("gamma", p.gamma), ("k", p.k)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::scenario(format!("params.{name}"), format!("must be finite and > 0, got {v}")));
                }
            }
            p.validate().map_err(|e| relabel(e, "params"))?;
        }
        self.integrator.validate().map_err(|e| relabel(e, "integrator"))?;
        if let Some(d) = self.delta0 {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::scenario("delta0", format!("must lie in (0, 1), got {d}")));
            }
        }
        for (i, c) in self.checks.iter().enumerate() {
            if c.model() != self.model {
                return Err(Error::scenario(
                    format!("checks[{i}]"),
                    format!("check {} does not apply to model {:?}", c.name(), self.model),
                ));
            }
            if c.needs_delta0() && self.delta0.is_none() {
                return Err(Error::scenario("delta0", format!("check {} needs delta0", c.name())));
            }
        }
        match self.model {
            ModelKind::Is => {
                self.require(self.params.is_some(), "params")?;
                let st = self.swarm_state()?;
                self.swarm_kernel(st.len())?;
            }
            ModelKind::Cs => {
                self.cs_kbar()?;
                let st = self.cs_state()?;
                self.swarm_kernel(st.len())?;
                if self.checks.contains(&CheckId::ChiLimit) {
                    let s = self.study.as_ref().ok_or_else(|| Error::scenario("study", "chi_limit needs a study block"))?;
                    if s.chis.iter().any(|c| !(*c > 0.0)) || !(s.gamma > 0.0) || !(s.k > 0.0) {
                        return Err(Error::scenario("study", "chis, gamma and k must be > 0"));
                    }
                }
            }
            ModelKind::Kuramoto => {
                let st = self.kuramoto_state()?;
                self.kuramoto_params(st.len())?;
            }
            ModelKind::Gronwall => {
                let g = self.gronwall.as_ref().ok_or_else(|| Error::scenario("gronwall", "missing gronwall block"))?;
                for (i, p) in g.gron1.iter().enumerate() {
                    p.validate().map_err(|e| relabel(e, &format!("gronwall.gron1[{i}]")))?;
                }
                for (i, p) in g.gron2.iter().enumerate() {
                    p.validate().map_err(|e| relabel(e, &format!("gronwall.gron2[{i}]")))?;
                }
            }
        }
        Ok(())
    }

    fn require(&self, ok: bool, field: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::scenario(field, format!("required for model {:?}", self.model)))
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        self.params.ok_or_else(|| Error::scenario("params", "missing"))
    }

    pub fn swarm_state(&self) -> Result<SwarmState> {
        let init = self.initial.as_ref().ok_or_else(|| Error::scenario("initial", "missing"))?;
        let st = init.swarm_state()?;
        let rep = crate::model::validate_initial(&st, crate::model::TOL_SPEED);
        if !rep.passed() {
            return Err(Error::scenario(
                "initial",
                format!(
                    "velocities must be unit and spins orthogonal: speed deviation {:e}, s.v deviation {:e}",
                    rep.max_speed_deviation(),
                    rep.max_orthogonality_deviation()
                ),
            ));
        }
        Ok(st)
    }

    pub fn cs_state(&self) -> Result<CSState> {
        let st = self.swarm_state()?;
        CSState::new(0.0, st.x, st.v).map_err(|e| relabel(e, "initial"))
    }

    pub fn swarm_kernel(&self, n: usize) -> Result<CommunicationKernel> {
        self.kernel
            .as_ref()
            .ok_or_else(|| Error::scenario("kernel", "missing"))?
            .build(n)
    }

    pub fn cs_kbar(&self) -> Result<f64> {
        match (self.kbar, self.params) {
            (Some(k), _) if k > 0.0 && k.is_finite() => Ok(k),
            (Some(k), _) => Err(Error::scenario("kbar", format!("must be > 0, got {k}"))),
            (None, Some(p)) => Ok(p.k / p.gamma),
            (None, None) => Err(Error::scenario("kbar", "give kbar or params")),
        }
    }

    pub fn kuramoto_state(&self) -> Result<KuramotoState> {
        self.initial
            .as_ref()
            .ok_or_else(|| Error::scenario("initial", "missing"))?
            .phases()
    }

    pub fn kuramoto_params(&self, n: usize) -> Result<KuramotoParams> {
        self.kuramoto
            .as_ref()
            .ok_or_else(|| Error::scenario("kuramoto", "missing"))?
            .build(n)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::scenario(path.display().to_string(), e.to_string()))?;
    Scenario::from_json(&text)
}

pub fn save_scenario(sc: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, sc.to_json()? + "\n")?;
    Ok(())
}

/// Bundled preset documents, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("aligned", include_str!("../presets/aligned.json")),
    ("thm1-pass", include_str!("../presets/thm1-pass.json")),
    ("thm1-fail", include_str!("../presets/thm1-fail.json")),
    ("thm2-pass", include_str!("../presets/thm2-pass.json")),
    ("ha-pass", include_str!("../presets/ha-pass.json")),
    ("kuramoto-chy", include_str!("../presets/kuramoto-chy.json")),
    ("cs-flock", include_str!("../presets/cs-flock.json")),
    ("chi-limit", include_str!("../presets/chi-limit.json")),
    ("gronwall-suite", include_str!("../presets/gronwall-suite.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Result<Scenario> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| {
            Error::scenario("preset", format!("unknown preset {name}, available: {}", preset_names().join(", ")))
        })?;
    Scenario::from_json(text)
}
