//! Adaptive quadrature on top of the double-exponential rule.
//!
//! The rule caps itself at roughly 350 evaluations per call, so long or
//! kinked intervals are split: callers pass breakpoints where the integrand is
//! not smooth, and each piece is bisected until its error estimate meets the
//! share of the tolerance it was given.

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 30;
/// Splitting stops once the halves' combined error estimate is no better than
/// this fraction of the parent's: the integrand is then resolved to its noise.
const STAGNATION: f64 = 0.5;

type Estimate = quadrature::Output;

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize, est: Estimate) -> Result<f64> {
    // Below a few ulps of the integral the estimate is rounding noise.
    let floor = tol.max(8.0 * f64::EPSILON * est.integral.abs());
    if est.error_estimate <= floor && est.integral.is_finite() {
        return Ok(est.integral);
    }
    let fail = || {
        Err(Error::Quadrature(format!(
            "error estimate {:.2e} above {tol:.2e} on [{a}, {b}]",
            est.error_estimate
        )))
    };
    if depth >= MAX_DEPTH || (b - a) <= 1e-12 * a.abs().max(b.abs()).max(1.0) {
        return if est.error_estimate <= 1e3 * floor && est.integral.is_finite() { Ok(est.integral) } else { fail() };
    }
    let mid = 0.5 * (a + b);
    let left = quadrature::integrate(f, a, mid, 0.5 * tol);
    let right = quadrature::integrate(f, mid, b, 0.5 * tol);
    let split_error = left.error_estimate + right.error_estimate;
    if depth >= 3 && split_error > STAGNATION * est.error_estimate {
        let sum = left.integral + right.integral;
        return if split_error <= 1e3 * floor && sum.is_finite() { Ok(sum) } else { fail() };
    }
    Ok(adapt(f, a, mid, 0.5 * tol, depth + 1, left)? + adapt(f, mid, b, 0.5 * tol, depth + 1, right)?)
}

/// `∫_a^b f` to absolute tolerance `tol`, splitting at the interior `breaks`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut nodes = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    inner.sort_by(|p, q| p.total_cmp(q));
    inner.dedup();
    nodes.extend(inner);
    nodes.push(hi);
    let share = tol / (nodes.len() - 1) as f64;
    let mut total = 0.0;
    for w in nodes.windows(2) {
        let est = quadrature::integrate(&f, w[0], w[1], share);
        total += adapt(&f, w[0], w[1], share, 0, est)?;
    }
    Ok(sign * total)
}

/// Where [`integrate_tail`] truncates `∫_a^∞`.
pub fn tail_cut(a: f64, rate: f64, scale: f64, tol: f64) -> f64 {
    a + ((10.0 * scale.max(tol) / (rate * tol)).ln() / rate).max(1.0 / rate)
}

/// `∫_a^∞ f` for an integrand bounded by `scale · e^{-rate (x - a)}`: the range is
/// cut where the tail falls below `tol / 10`.
pub fn integrate_tail<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    rate: f64,
    scale: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Quadrature(format!("non-positive decay rate {rate}")));
    }
    let cut = tail_cut(a, rate, scale, tol);
    // Pieces of a few decay lengths keep each call well resolved.
    let piece = 4.0 / rate;
    let mut nodes: Vec<f64> = breaks.to_vec();
    let mut x = a + piece;
    while x < cut {
        nodes.push(x);
        x += piece;
    }
    integrate(f, a, cut, &nodes, 0.9 * tol)
}
