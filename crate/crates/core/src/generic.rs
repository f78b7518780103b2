//! Quadrature-backed travelling waves for arbitrary admissible kernels.
//!
//! Nothing here uses the closed forms of [`crate::profile`]: the synaptic profile
//! is the improper integral `σ(ξ) = (1/c) Σ_j ∫_0^∞ w(y - ξ + c T_j) p(y/c) dy` and
//! the voltage profile is its leaky integral plus the resets. It is slow, but it
//! accepts any [`Coupling`] and [`Synapse`], which makes it both the fallback for
//! kernels outside the double-exponential family and the reference the closed
//! forms are checked against.

use crate::error::{Error, Result};
use crate::kernel::{Coupling, DoubleExponential, ExponentialSynapse, Synapse};
use crate::newton::{damped_newton, NewtonOptions};
use crate::params::ModelParams;
use crate::quad;
use crate::solver::admissible_unknowns;
use crate::wave::CoarseWave;

#[derive(Debug, Clone, Copy)]
pub struct QuadratureModel<W, P> {
    pub coupling: W,
    pub synapse: P,
    pub drive: f64,
    /// Absolute tolerance of every profile value.
    pub tol: f64,
}

impl QuadratureModel<DoubleExponential, ExponentialSynapse> {
    pub fn from_params(p: &ModelParams, tol: f64) -> Self {
        Self {
            coupling: DoubleExponential::from(p),
            synapse: ExponentialSynapse { beta: p.beta },
            drive: p.drive,
            tol,
        }
    }
}

impl<W: Coupling, P: Synapse> QuadratureModel<W, P> {
    fn sigma_tol(&self, xi: f64, wave: &CoarseWave, tol: f64) -> Result<f64> {
        let c = wave.c;
        let rate = self.synapse.decay_rate() / c;
        let scale = self.coupling.bound() * self.synapse.bound();
        let share = c * tol / wave.m() as f64;
        let mut total = 0.0;
        for xj in wave.crossings() {
            let kink = xi - xj;
            let f = |y: f64| self.coupling.w(y - kink) * self.synapse.p(y / c);
            total += quad::integrate_tail(f, 0.0, rate, scale, &[kink], share)?;
        }
        Ok(total / c)
    }

    /// `σ(ξ)`.
    pub fn sigma(&self, xi: f64, wave: &CoarseWave) -> Result<f64> {
        self.sigma_tol(xi, wave, self.tol)
    }

    /// `ν(ξ)`, the left limit at `ξ = c T_i`.
    pub fn nu(&self, xi: f64, wave: &CoarseWave) -> Result<f64> {
        let c = wave.c;
        let m = wave.m() as f64;
        let resets: f64 = wave
            .crossings()
            .filter(|&x| xi > x)
            .map(|x| (-(xi - x) / c).exp())
            .sum();
        // ∫_0^∞ e^{-u/c} σ(ξ - u) du; inner errors are weighted by at most c.
        let inner = 0.1 * self.tol / c;
        let sigma_sup = m * self.coupling.bound() * self.synapse.bound() / self.synapse.decay_rate();
        let breaks: Vec<f64> = wave.crossings().map(|x| xi - x).collect();
        let cell = std::cell::Cell::new(None);
        let f = |u: f64| match self.sigma_tol(xi - u, wave, inner) {
            Ok(v) => v * (-u / c).exp(),
            Err(e) => {
                cell.set(Some(e.to_string()));
                f64::NAN
            }
        };
        let leaky = quad::integrate_tail(f, 0.0, 1.0 / c, sigma_sup, &breaks, 0.9 * self.tol);
        if let Some(msg) = cell.take() {
            return Err(Error::Quadrature(msg));
        }
        Ok(self.drive - resets + leaky?)
    }

    /// `ν(c T_i⁻) - 1` for every spike.
    pub fn threshold_residuals(&self, wave: &CoarseWave) -> Result<Vec<f64>> {
        wave.crossings().map(|x| Ok(self.nu(x, wave)? - 1.0)).collect()
    }

    /// Newton on the threshold conditions; `opts.tol` should sit well above `self.tol`.
    pub fn solve_wave(&self, guess: &CoarseWave, opts: NewtonOptions) -> Result<(CoarseWave, f64)> {
        guess.check()?;
        let f = |x: &[f64]| self.threshold_residuals(&CoarseWave::from_unknowns(x));
        let out = damped_newton(f, admissible_unknowns, &guess.to_unknowns(), opts)?;
        Ok((CoarseWave::from_unknowns(&out.x), out.residual))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exponential connectivity `e^{-|x|}` with no inhibition.
    struct Laplace;

    impl Coupling for Laplace {
        fn w(&self, x: f64) -> f64 {
            (-x.abs()).exp()
        }
        fn bound(&self) -> f64 {
            1.0
        }
        fn decay_rate(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn sigma_far_ahead_is_zero_and_behind_decays() {
        let model = QuadratureModel::from_params(&ModelParams::default(), 1e-12);
        let wave = CoarseWave::new(0.3, vec![0.0]).unwrap();
        assert!(model.sigma(-30.0, &wave).unwrap().abs() < 1e-12);
        assert!((model.nu(-30.0, &wave).unwrap() - 0.9).abs() < 1e-11);
    }

    #[test]
    fn single_spike_with_laplace_kernel() {
        // For w = e^{-|x|}, p = e^{-t}: c σ(ξ) at ξ ≤ 0 is c e^{ξ}/(1 + c).
        let model = QuadratureModel {
            coupling: Laplace,
            synapse: ExponentialSynapse { beta: 1.0 },
            drive: 0.0,
            tol: 1e-12,
        };
        let c = 0.7;
        let wave = CoarseWave::new(c, vec![0.0]).unwrap();
        for &xi in &[-2.0_f64, -0.5, 0.0] {
            let exact = xi.exp() / (1.0 + c);
            assert!((model.sigma(xi, &wave).unwrap() - exact).abs() < 1e-11, "{xi}");
        }
    }
}
