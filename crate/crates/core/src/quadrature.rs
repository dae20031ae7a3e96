//! Adaptive Simpson quadrature used by the Gronwall bounds and the metric kernel integrals.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to a relative tolerance `rel_tol` (with an absolute floor
/// `abs_floor` so integrands that vanish identically terminate).
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_simpson(f, b, a, rel_tol, abs_floor).map(|v| -v);
    }
    // A coarse composite pass sets the absolute target and guards against integrands
    // that happen to vanish at the five initial nodes.
    let panels = 16;
    let h = (b - a) / panels as f64;
    let mut coarse = 0.0;
    let mut pieces = Vec::with_capacity(panels);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        coarse += whole.abs();
        pieces.push((lo, hi, flo, fmid, fhi, whole));
    }
    let tol = (rel_tol * coarse).max(abs_floor);
    let mut total = 0.0;
    for (lo, hi, flo, fmid, fhi, whole) in pieces {
        total += recurse(&f, lo, hi, flo, fmid, fhi, whole, tol / panels as f64, MAX_DEPTH)?;
    }
    if !total.is_finite() {
        return Err(Error::Quadrature { a, b });
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || !(delta.is_finite()) {
        return Err(Error::Quadrature { a, b });
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Integrates over `[a, b]` splitting at the supplied breakpoints (jump discontinuities of the
/// integrand). Each piece is sampled strictly inside its endpoints, so the value of `f` exactly at
/// a jump does not matter.
pub fn adaptive_simpson_split<F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut lo = a;
    let mut total = 0.0;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        let eps = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let (inner_lo, inner_hi) = (lo + eps, hi - eps);
        let g = |u: f64| f(u.clamp(inner_lo.min(inner_hi), inner_hi.max(inner_lo)));
        total += adaptive_simpson(g, lo, hi, rel_tol, abs_floor)?;
        lo = hi;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| 3.0 * x * x + 1.0, 0.0, 2.0, 1e-12, 1e-15).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_to_relative_tolerance() {
        let v = adaptive_simpson(|x: f64| (-x).exp(), 0.0, 30.0, 1e-10, 1e-300).unwrap();
        let exact = 1.0 - (-30.0f64).exp();
        assert!(((v - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn reversed_interval_negates() {
        let v = adaptive_simpson(|x: f64| x.cos(), 1.0, 0.0, 1e-12, 1e-15).unwrap();
        assert!((v + 1.0f64.sin()).abs() < 1e-11);
    }

    #[test]
    fn step_function_with_breakpoint() {
        let f = |x: f64| if x < 1.5 { 2.0 } else { 0.0 };
        let v = adaptive_simpson_split(f, 0.0, 4.0, &[1.5], 1e-12, 1e-15).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }
}
