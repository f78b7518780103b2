//! Brute-force references for the closed forms and the event propagator.
//!
//! Nothing in this module calls [`crate::profile`], [`crate::stability`] or the
//! DIFM propagator: profiles come from [`crate::generic`], matrix entries and
//! the linearisation check from direct quadrature of their defining integrals,
//! and inter-event dynamics from an adaptive Dormand–Prince integrator.

use num_complex::Complex64;
use ode_solvers::{DVector, Dop853, System};
use serde::{Deserialize, Serialize};

use crate::difm::{Network, NetworkState};
use crate::error::{Error, Result};
use crate::generic::QuadratureModel;
use crate::kernel::{kernel_w, psi, Coupling, DoubleExponential, ExponentialSynapse, Synapse};
use crate::params::ModelParams;
use crate::parallel::ExecutionMode;
use crate::quad;
use crate::wave::CoarseWave;

/// Where improper integrals are cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    /// Where the exponential decay bound drops below `abs_tol / 10`.
    DecayBound,
    /// A fixed span past the lower limit.
    Span(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub truncation: Truncation,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-11, rel_tol: 1e-11, truncation: Truncation::DecayBound }
    }
}

impl QuadratureSpec {
    fn check(&self) -> Result<()> {
        if self.abs_tol > 0.0 && self.rel_tol > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams("quadrature tolerances must be positive".into()))
        }
    }
}

fn model(p: &ModelParams, spec: &QuadratureSpec) -> Result<QuadratureModel<DoubleExponential, ExponentialSynapse>> {
    spec.check()?;
    Ok(QuadratureModel::from_params(p, spec.abs_tol))
}

/// `ν(ξ)` by nested quadrature of its double integral.
pub fn quad_nu(xi: f64, wave: &CoarseWave, p: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    model(p, spec)?.nu(xi, wave)
}

/// `σ(ξ)` by quadrature.
pub fn quad_sigma(xi: f64, wave: &CoarseWave, p: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    model(p, spec)?.sigma(xi, wave)
}

/// Single-spike speed condition `ν(0⁻; c, (0)) - 1` by quadrature.
pub fn quad_compat(c: f64, p: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    let wave = CoarseWave::new(c, vec![0.0])?;
    Ok(quad_nu(0.0, &wave, p, spec)? - 1.0)
}

/// `M_ij(z)` (zero-based) by quadrature of
/// `e^{T_ji} [1_{j<i} + ∫_{cT_ji}^∞ e^{-(z+1/c)y} w(y) ψ_ij(y) dy]`.
pub fn quad_m(i: usize, j: usize, z: Complex64, wave: &CoarseWave, p: &ModelParams, spec: &QuadratureSpec) -> Result<Complex64> {
    spec.check()?;
    if !(z.re > -p.eta) {
        return Err(Error::Domain(format!("Re z = {} outside the strip", z.re)));
    }
    let c = wave.c;
    let t_ji = wave.t[j] - wave.t[i];
    let y0 = c * t_ji;
    let coupling = DoubleExponential::from(p);
    let g = |y: f64| -> Complex64 {
        let psi = psi(i, j, y.max(y0), wave, p).unwrap_or(f64::NAN);
        (-(z + 1.0 / c) * y).exp() * (kernel_w(y, p) * psi)
    };
    let breaks = if y0 < 0.0 { vec![0.0] } else { vec![] };
    let integral = match spec.truncation {
        Truncation::Span(span) => {
            let re = quad::integrate(|y| g(y).re, y0, y0 + span, &breaks, spec.abs_tol)?;
            let im = quad::integrate(|y| g(y).im, y0, y0 + span, &breaks, spec.abs_tol)?;
            Complex64::new(re, im)
        }
        Truncation::DecayBound => {
            // ψ grows at most like e^{(1-β) y / c} when β < 1.
            let rate = z.re + p.beta.min(1.0) / c + coupling.decay_rate();
            let psi_sup = p.beta + p.beta * p.beta / (p.beta - 1.0).abs().max(1e-3);
            let scale = coupling.bound()
                * psi_sup
                * (-(z.re + 1.0 / c) * y0).exp().max(1.0)
                * (coupling.decay_rate() * y0.abs()).exp();
            let re = quad::integrate_tail(|y| g(y).re, y0, rate, scale, &breaks, spec.abs_tol)?;
            let im = quad::integrate_tail(|y| g(y).im, y0, rate, scale, &breaks, spec.abs_tol)?;
            Complex64::new(re, im)
        }
    };
    let step = if j < i { 1.0 } else { 0.0 };
    Ok((integral + step) * t_ji.exp())
}

/// Sign-change bisection of `f` on `[lo, hi]` down to an interval of width `tol`.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Domain(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Single-spike speeds on `[c_min, c_max]`: sign changes of [`quad_compat`] on a
/// geometric grid, each refined by bisection.
pub fn m1_speeds_by_bisection(
    p: &ModelParams,
    c_min: f64,
    c_max: f64,
    samples: usize,
    tol: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    if !(c_min > 0.0 && c_max > c_min && samples >= 2) {
        return Err(Error::InvalidParams("bracket needs 0 < c_min < c_max and two samples".into()));
    }
    let ratio = (c_max / c_min).powf(1.0 / (samples - 1) as f64);
    let grid: Vec<f64> = (0..samples).map(|k| c_min * ratio.powi(k as i32)).collect();
    let values = grid.iter().map(|&c| quad_compat(c, p, spec)).collect::<Result<Vec<_>>>()?;
    let mut roots = Vec::new();
    for k in 0..samples - 1 {
        if values[k].signum() != values[k + 1].signum() {
            roots.push(bisect(|c| quad_compat(c, p, spec), grid[k], grid[k + 1], tol)?);
        }
    }
    Ok(roots)
}

struct Relaxation {
    drive: Vec<f64>,
    beta: f64,
}

impl System<f64, DVector<f64>> for Relaxation {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let n = self.drive.len();
        for i in 0..n {
            dy[i] = self.drive[i] - y[i] + y[n + i];
            dy[n + i] = -self.beta * y[n + i];
        }
    }
}

/// Integrates `v' = I_i(t) - v + s`, `s' = -β s` from `state` through each of
/// `times` (increasing, not before `state.t`) with an 8th-order Dormand–Prince
/// pair at tolerance `1e-12`. Resets are not applied: the span must be free of
/// firings, and a sample at or above threshold is an error.
pub fn rk_reference(state: &NetworkState, net: &Network, times: &[f64]) -> Result<Vec<NetworkState>> {
    let n = net.n();
    let beta = net.params().beta;
    let mut t = state.t;
    let mut y = DVector::from_iterator(2 * n, state.v.iter().chain(&state.s).copied());
    let tau = net.params().stimulus.tau_ext;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(Error::InvalidParams(format!("output time {target} precedes {t}")));
        }
        // The drive is piecewise constant; never step across its switch.
        let mut stops = Vec::new();
        if t < tau && tau < target {
            stops.push(tau);
        }
        stops.push(target);
        for stop in stops {
            if stop > t {
                let drive = (0..n).map(|i| net.drive(i, t)).collect();
                let mut solver = Dop853::new(Relaxation { drive, beta }, t, stop, stop - t, y.clone(), 1e-12, 1e-12);
                solver.integrate().map_err(|e| Error::Integration(format!("{e:?}")))?;
                y = solver.y_out().last().cloned().ok_or_else(|| Error::Integration("no output".into()))?;
                t = stop;
            }
        }
        let v: Vec<f64> = y.iter().take(n).copied().collect();
        if let Some(i) = v.iter().position(|x| *x >= 1.0) {
            return Err(Error::Domain(format!("neuron {i} reached threshold by t = {target}")));
        }
        out.push(NetworkState { t: target, v, s: y.iter().skip(n).copied().collect() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub count: usize,
}

impl Default for FdGrid {
    fn default() -> Self {
        Self { x_min: -0.5, x_max: 0.5, count: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationCheck {
    pub eps: Vec<f64>,
    /// `max_{i, x} |V_m(τ + εφ) - 1|` on the perturbed firing set.
    pub residuals: Vec<f64>,
    /// Log–log slope of residual against `ε`.
    pub order: f64,
}

struct Perturbed<'a> {
    wave: &'a CoarseWave,
    lambda: Complex64,
    phi: &'a [Complex64],
    eps: f64,
}

impl Perturbed<'_> {
    fn tau(&self, j: usize, x: f64) -> f64 {
        x / self.wave.c + self.wave.t[j] + self.eps * (self.phi[j] * (self.lambda * x).exp()).re
    }

    /// The `y` where `τ_j(y) = t`, by bisection around the unperturbed solution.
    fn arrival(&self, j: usize, t: f64) -> Result<f64> {
        let c = self.wave.c;
        let y = c * (t - self.wave.t[j]);
        let mut half = 0.1 * c;
        loop {
            let (lo, hi) = (y - half, y + half);
            if self.tau(j, lo) < t && self.tau(j, hi) > t {
                return bisect(|s| Ok(self.tau(j, s) - t), lo, hi, 1e-15 * (1.0 + y.abs()));
            }
            half *= 2.0;
            if half > 1e3 {
                return Err(Error::Domain(format!("perturbed firing function {j} does not reach t = {t}")));
            }
        }
    }

    /// Offsets `s ∈ (0, span)` where `t - τ_j(y* - s)` changes sign. For large
    /// `ε` the perturbed firing line folds back far behind the front, and the
    /// synaptic response has a kink wherever its argument crosses zero.
    fn activation_changes(&self, j: usize, t: f64, y_star: f64, span: f64) -> Result<Vec<f64>> {
        const SAMPLES: usize = 400;
        let g = |s: f64| t - self.tau(j, y_star - s);
        let h = span / SAMPLES as f64;
        let mut out = Vec::new();
        let mut prev = g(h);
        for k in 2..=SAMPLES {
            let s = h * k as f64;
            let cur = g(s);
            if (prev > 0.0) != (cur > 0.0) {
                out.push(bisect(|u| Ok(g(u)), s - h, s, 1e-15 * (1.0 + s))?);
            }
            prev = cur;
        }
        Ok(out)
    }

    /// `V_m(τ)(x, τ_i(x)⁻) - 1`.
    fn residual(&self, i: usize, x: f64, p: &ModelParams, tol: f64) -> Result<f64> {
        let syn = ExponentialSynapse { beta: p.beta };
        let coupling = DoubleExponential::from(p);
        let t = self.tau(i, x);
        let mut v = p.drive;
        for j in 0..self.wave.m() {
            let tj = self.tau(j, x);
            if tj < t && j != i {
                v -= (tj - t).exp();
            }
            // (Sτ_j)(x, t) = ∫ w(x - y) K(t - τ_j(y)) dy over y with τ_j(y) < t,
            // written as s = y* - y ≥ 0.
            let y_star = self.arrival(j, t)?;
            let f = |s: f64| {
                let y = y_star - s;
                coupling.w(x - y) * syn.leaky_response(t - self.tau(j, y))
            };
            // K ≤ sup p and w decays at its own rate away from y = x.
            let scale = coupling.bound() * syn.bound() * (coupling.decay_rate() * (y_star - x).abs()).exp();
            let mut breaks = vec![y_star - x];
            breaks.extend(self.activation_changes(j, t, y_star, quad::tail_cut(0.0, coupling.decay_rate(), scale, tol))?);
            v += quad::integrate_tail(f, 0.0, coupling.decay_rate(), scale, &breaks, tol)?;
        }
        Ok(v - 1.0)
    }
}

/// Perturbs the firing functions to `x/c + T_j + ε Re(Φ_j e^{λx})` and measures
/// the exact threshold residual on the perturbed firing set at each `ε`.
///
/// For a kernel pair of the linearised operator the first-order term vanishes
/// and the fitted order is 2; for any other direction it is 1.
pub fn fd_linearization_check(
    wave: &CoarseWave,
    p: &ModelParams,
    lambda: Complex64,
    phi: &[Complex64],
    eps_list: &[f64],
    grid: &FdGrid,
    tol: f64,
    mode: ExecutionMode,
) -> Result<LinearizationCheck> {
    wave.check()?;
    if phi.len() != wave.m() {
        return Err(Error::InvalidParams(format!("mode has {} entries, wave has {} spikes", phi.len(), wave.m())));
    }
    if grid.count < 2 || !(grid.x_max > grid.x_min) {
        return Err(Error::InvalidParams("linearisation grid needs two distinct points".into()));
    }
    if eps_list.len() < 2 || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParams("need at least two positive perturbation sizes".into()));
    }
    // The second-order remainder is integrable against w only while e^{2 Re λ y} decays
    // slower than w does as y → -∞.
    if -2.0 * lambda.re >= DoubleExponential::from(p).decay_rate() {
        return Err(Error::Domain(format!(
            "Re λ = {} decays too fast for the kernel to resolve a quadratic remainder",
            lambda.re
        )));
    }
    let h = (grid.x_max - grid.x_min) / (grid.count - 1) as f64;
    let points: Vec<(usize, f64)> = (0..grid.count)
        .flat_map(|k| (0..wave.m()).map(move |i| (i, grid.x_min + h * k as f64)))
        .collect();
    let mut residuals = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let pert = Perturbed { wave, lambda, phi, eps };
        let values = mode.map(&points, |&(i, x)| pert.residual(i, x, p, tol));
        let mut worst: f64 = 0.0;
        for v in values {
            worst = worst.max(v?.abs());
        }
        residuals.push(worst);
    }
    let pts: Vec<(f64, f64)> = eps_list.iter().zip(&residuals).map(|(e, r)| (*e, *r)).collect();
    let order = if residuals.iter().all(|r| *r > 0.0) {
        crate::difm::loglog_slope(&pts)?.0
    } else {
        f64::NAN
    };
    Ok(LinearizationCheck { eps: eps_list.to_vec(), residuals, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt_two() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| Ok(x * x + 1.0), 0.0, 2.0, 1e-6).is_err());
    }

    #[test]
    fn quadrature_spec_rejects_zero_tolerance() {
        let spec = QuadratureSpec { abs_tol: 0.0, ..Default::default() };
        let wave = CoarseWave::new(1.0, vec![0.0]).unwrap();
        assert!(quad_nu(0.0, &wave, &ModelParams::default(), &spec).is_err());
    }
}
