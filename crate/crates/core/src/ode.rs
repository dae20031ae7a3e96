//! Fixed-step RK4 for small flat systems `y' = f(t, y)` (phase models, scalar oracles),
//! sharing the stepping and halving contract of the swarm integrator.

use crate::error::{Error, Result};

/// Sampled solution of a flat system.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Component `c` across all samples.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.y.iter().map(|y| y[c]).collect()
    }

    fn sup_gap(&self, other: &Samples) -> f64 {
        self.y
            .iter()
            .zip(&other.y)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn rk4_step<F>(f: &F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1);
    for c in 0..n {
        tmp[c] = y[c] + 0.5 * h * k1[c];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for c in 0..n {
        tmp[c] = y[c] + 0.5 * h * k2[c];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for c in 0..n {
        tmp[c] = y[c] + h * k3[c];
    }
    f(t + h, &tmp, &mut k4);
    (0..n)
        .map(|c| y[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
        .collect()
}

/// `steps` RK4 steps of size `h`, storing every `sample_every`-th state (and the initial one).
pub fn integrate_fixed<F>(
    f: &F,
    t0: f64,
    y0: &[f64],
    h: f64,
    steps: usize,
    sample_every: usize,
) -> Result<Samples>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(h > 0.0) || sample_every == 0 {
        return Err(Error::InvalidParameter(
            "step must be > 0 and sample cadence >= 1".into(),
        ));
    }
    let mut out = Samples {
        t: vec![t0],
        y: vec![y0.to_vec()],
    };
    let mut y = y0.to_vec();
    for n in 1..=steps {
        let t = t0 + (n - 1) as f64 * h;
        y = rk4_step(f, t, &y, h);
        if let Some(c) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                t: t + h,
                particle: c,
            });
        }
        if n % sample_every == 0 {
            out.t.push(t0 + n as f64 * h);
            out.y.push(y.clone());
        }
    }
    Ok(out)
}

/// Halves the step until two successive solutions agree to `tol` on the sample grid.
pub fn integrate_reference<F>(
    f: &F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    sample_interval: f64,
    initial_dt: f64,
    tol: f64,
) -> Result<Samples>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    const MAX_STEPS: usize = 1 << 24;
    let intervals = ((t_end - t0) / sample_interval).round() as usize;
    let mut m = ((sample_interval / initial_dt).round() as usize).max(1);
    let run = |m: usize| integrate_fixed(f, t0, y0, sample_interval / m as f64, intervals * m, m);
    let mut prev = run(m)?;
    if intervals == 0 {
        return Ok(prev);
    }
    let mut gap = f64::INFINITY;
    while intervals * m * 2 <= MAX_STEPS {
        m *= 2;
        let cur = run(m)?;
        gap = prev.sup_gap(&cur);
        if gap <= tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::OracleBudget {
        steps: intervals * m,
        gap,
    })
}
