//! The oracle battery: closed forms, root finder and propagator against their
//! brute-force references on a fixed set of cases.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::difm::{next_event, propagate, Network, NetworkState};
use crate::error::Result;
use crate::families::{fast_tw1, tw3_reference};
use crate::oracles::{
    fd_linearization_check, m1_speeds_by_bisection, quad_m, quad_nu, quad_sigma, rk_reference, FdGrid, QuadratureSpec,
};
use crate::params::{ModelParams, Numerics};
use crate::parallel::ExecutionMode;
use crate::profile::{profile_nu, profile_sigma};
use crate::stability::{build_matrices, classify, evaluate_e, stability_entry_m, ClassifyOptions, TRIVIAL_ROOT_RADIUS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    /// Pass when `lower ≤ value ≤ upper`.
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

fn check(name: &str, value: f64, lower: f64, upper: f64) -> OracleCheck {
    OracleCheck { name: name.to_string(), value, lower, upper, passed: value >= lower && value <= upper }
}

/// Runs every check; numerical failures inside a check propagate as errors.
pub fn oracle_battery(mode: ExecutionMode) -> Result<Vec<OracleCheck>> {
    let numerics = Numerics::default();
    let base = ModelParams::default();
    let spec = QuadratureSpec::default();
    let tw3 = tw3_reference(&base, &numerics, mode)?;
    let p = base.with_beta(tw3.beta);
    let w = &tw3.wave;
    let mut out = Vec::new();

    let xis = [-1.0, 0.0, 0.1, 0.3, 0.5, 2.0];
    let profile_err = mode.map(&xis, |&xi| -> Result<f64> {
        let dn = (profile_nu(xi, w, &p) - quad_nu(xi, w, &p, &spec)?).abs();
        let ds = (profile_sigma(xi, w, &p) - quad_sigma(xi, w, &p, &spec)?).abs();
        Ok(dn.max(ds))
    });
    out.push(check("profile nu/sigma vs quadrature", max_of(profile_err)?, 0.0, 1e-8));

    let z = Complex64::new(-1.0, 3.0);
    let pairs: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
    let m_err = mode.map(&pairs, |&(i, j)| -> Result<f64> {
        Ok((stability_entry_m(i, j, z, w, &p)? - quad_m(i, j, z, w, &p, &spec)?).norm())
    });
    out.push(check("M entries vs quadrature", max_of(m_err)?, 0.0, 1e-8));

    let mats = build_matrices(w, &p)?;
    out.push(check("|E(0)| / scale", evaluate_e(Complex64::new(0.0, 0.0), &mats)?.norm() / mats.scale(), 0.0, 1e-10));

    let p1 = base.with_beta(4.5);
    let tw1 = fast_tw1(&p1, &numerics)?;
    let roots = m1_speeds_by_bisection(&p1, 0.05, 20.0, 60, 1e-13, &spec)?;
    let nearest = roots.iter().map(|r| (r - tw1.wave.c).abs()).fold(f64::INFINITY, f64::min);
    out.push(check("m=1 speed vs bisection", nearest, 0.0, 1e-8));

    let mut q = base;
    q.domain.n = 20;
    q.stimulus.d1 = 0.0;
    let net = Network::new(&q, mode)?;
    let state = NetworkState {
        t: 0.0,
        v: (0..20).map(|i| 0.1 + 0.02 * i as f64).collect(),
        s: (0..20).map(|i| 0.05 * (i % 3) as f64).collect(),
    };
    let quiet = next_event(&state, &net, 1.0).is_none();
    let reference = rk_reference(&state, &net, &[1.0])?;
    let mut exact = state.clone();
    propagate(&mut exact, &net, 1.0);
    let dv = exact.v.iter().zip(&reference[0].v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.push(check("propagator vs Runge-Kutta", if quiet { dv } else { f64::INFINITY }, 0.0, 1e-9));

    let report = classify(w, &p, &ClassifyOptions { mode, ..ClassifyOptions::from(numerics) })?;
    let lead = report
        .roots
        .iter()
        .filter(|r| r.lambda.norm() > TRIVIAL_ROOT_RADIUS && r.lambda.im >= 0.0)
        .max_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re));
    if let Some(root) = lead {
        let eps = [1e-2, 1e-3, 1e-4];
        let grid = FdGrid::default();
        let pair = fd_linearization_check(w, &p, root.lambda, &root.phi, &eps, &grid, 1e-13, mode)?;
        out.push(check("linearisation order, root pair", pair.order, 1.9, f64::INFINITY));
        let other = [Complex64::new(0.3, 0.1), Complex64::new(-0.7, 0.4), Complex64::new(1.0, 0.0)];
        let random = fd_linearization_check(w, &p, root.lambda, &other, &eps, &grid, 1e-13, mode)?;
        out.push(check("linearisation order, random vector", random.order, 0.9, 1.1));
    } else {
        out.push(check("linearisation order, root pair", f64::NAN, 1.9, f64::INFINITY));
    }
    Ok(out)
}

fn max_of(values: Vec<Result<f64>>) -> Result<f64> {
    values.into_iter().try_fold(0.0, |acc: f64, v| Ok(acc.max(v?)))
}
