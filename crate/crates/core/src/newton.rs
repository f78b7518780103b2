//! Damped Newton iteration with a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 50, fd_step: 1e-6, max_halvings: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn fd_increment(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1e-2)
}

/// Central-difference Jacobian of `f` at `x`; `f` must accept every probe point.
pub fn fd_jacobian<F>(f: &F, x: &[f64], rel: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut probe = x.to_vec();
    let mut rows = 0;
    for k in 0..n {
        let h = fd_increment(x[k], rel);
        probe[k] = x[k] + h;
        let fp = f(&probe)?;
        probe[k] = x[k] - h;
        let fm = f(&probe)?;
        probe[k] = x[k];
        rows = fp.len();
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    Ok(DMatrix::from_fn(rows, n, |i, j| cols[j][i]))
}

/// Solves `J dx = -r`; least squares when `J` is not square.
pub fn newton_step(jac: &DMatrix<f64>, r: &[f64]) -> Option<Vec<f64>> {
    let rhs = -DVector::from_column_slice(r);
    let dx = if jac.is_square() {
        jac.clone().lu().solve(&rhs)?
    } else {
        jac.clone().svd(true, true).solve(&rhs, 1e-14).ok()?
    };
    dx.iter().all(|v| v.is_finite()).then(|| dx.as_slice().to_vec())
}

/// Newton iteration on `f(x) = 0`.
///
/// A step is halved while the trial point is inadmissible (`f` returns an error
/// or `admissible` rejects it) or does not reduce the residual; after
/// `max_halvings` the smallest admissible trial is taken regardless.
pub fn damped_newton<F, A>(f: F, admissible: A, x0: &[f64], opts: NewtonOptions) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    A: Fn(&[f64]) -> bool,
{
    if !admissible(x0) {
        return Err(Error::OrderViolation(format!("initial guess is inadmissible: {x0:?}")));
    }
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut norm = max_norm(&r);
    for it in 0..opts.max_iter {
        if norm <= opts.tol {
            return Ok(NewtonOutcome { x, residual: norm, iterations: it });
        }
        let jac = fd_jacobian(&f, &x, opts.fd_step)?;
        let dx = newton_step(&jac, &r).ok_or(Error::NoConvergence { iterations: it, residual: norm })?;
        let mut scale = 1.0;
        let mut fallback: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + scale * d).collect();
            if admissible(&trial) {
                if let Ok(rt) = f(&trial) {
                    let nt = max_norm(&rt);
                    if nt.is_finite() {
                        if nt < norm {
                            accepted = Some((trial, rt, nt));
                            break;
                        }
                        fallback = Some((trial, rt, nt));
                    }
                }
            }
            scale *= 0.5;
        }
        let Some((xn, rn, nn)) = accepted.or(fallback) else {
            return Err(Error::OrderViolation(format!(
                "no admissible Newton step after {} halvings at iteration {it}",
                opts.max_halvings
            )));
        };
        x = xn;
        r = rn;
        norm = nn;
    }
    if norm <= opts.tol {
        return Ok(NewtonOutcome { x, residual: norm, iterations: opts.max_iter });
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_small_nonlinear_system() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]]);
        let out = damped_newton(f, |_| true, &[1.0, 0.5], NewtonOptions::default()).unwrap();
        let r = std::f64::consts::SQRT_2;
        assert!((out.x[0] - r).abs() < 1e-10 && (out.x[1] - r).abs() < 1e-10);
    }

    #[test]
    fn damping_keeps_iterates_admissible() {
        // Undamped Newton from x = 0.1 on ln x = 0 would overshoot to x < 0 for steeper
        // variants; here the admissible cone is x > 0.
        let f = |x: &[f64]| Ok(vec![(x[0]).ln() + 3.0 * (x[0] - 1.0)]);
        let out = damped_newton(f, |x| x[0] > 0.0, &[5.0], NewtonOptions::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reports_inadmissible_start() {
        let f = |x: &[f64]| Ok(vec![x[0]]);
        assert!(damped_newton(f, |x| x[0] > 0.0, &[-1.0], NewtonOptions::default()).is_err());
    }
}
