//! Connectivity and post-synaptic kernels.
//!
//! The closed-form machinery assumes the double-exponential connectivity
//! `w(x) = a1 e^{-b1|x|} - a2 e^{-b2|x|}` and the exponential post-synaptic
//! potential `p(t) = β e^{-βt}`. The [`Coupling`] and [`Synapse`] traits open the
//! quadrature-backed path in [`crate::generic`] to other admissible kernels.

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::wave::CoarseWave;

/// Even, continuous, exponentially bounded connectivity kernel.
pub trait Coupling: Sync {
    fn w(&self, x: f64) -> f64;
    /// `sup |w|`.
    fn bound(&self) -> f64;
    /// Rate `r` with `|w(x)| ≤ K e^{-r|x|}`; used to truncate improper integrals.
    fn decay_rate(&self) -> f64;
}

/// Bounded, Lipschitz post-synaptic potential `p` on `t ≥ 0`.
pub trait Synapse: Sync {
    fn p(&self, t: f64) -> f64;
    fn dp(&self, t: f64) -> f64;
    /// `sup |p|`.
    fn bound(&self) -> f64;
    /// `∫_0^τ e^{s-τ} p(s) ds`, the leaky voltage response to one unit input
    /// delivered `τ` time units ago; zero for `τ ≤ 0`.
    fn leaky_response(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        quadrature::integrate(|s| (s - tau).exp() * self.p(s), 0.0, tau, 1e-14).integral
    }
    /// Rate `r` with `|p(t)| ≤ K e^{-r t}`.
    fn decay_rate(&self) -> f64;
}

/// The double-exponential kernel of [`ModelParams`].
#[derive(Debug, Clone, Copy)]
pub struct DoubleExponential {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl From<&ModelParams> for DoubleExponential {
    fn from(p: &ModelParams) -> Self {
        Self { a1: p.a1, a2: p.a2, b1: p.b1, b2: p.b2 }
    }
}

impl Coupling for DoubleExponential {
    fn w(&self, x: f64) -> f64 {
        let r = x.abs();
        self.a1 * (-self.b1 * r).exp() - self.a2 * (-self.b2 * r).exp()
    }

    fn bound(&self) -> f64 {
        self.a1.abs().max(self.a2.abs())
    }

    fn decay_rate(&self) -> f64 {
        match (self.a1 > 0.0, self.a2 > 0.0) {
            (true, true) => self.b1.min(self.b2),
            (true, false) => self.b1,
            (false, true) => self.b2,
            (false, false) => f64::INFINITY,
        }
    }
}

/// `p(t) = β e^{-βt}`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialSynapse {
    pub beta: f64,
}

impl Synapse for ExponentialSynapse {
    fn p(&self, t: f64) -> f64 {
        self.beta * (-self.beta * t).exp()
    }

    fn dp(&self, t: f64) -> f64 {
        -self.beta * self.beta * (-self.beta * t).exp()
    }

    fn bound(&self) -> f64 {
        self.beta
    }

    fn leaky_response(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let a = self.beta - 1.0;
        if a.abs() < BETA_ONE_WINDOW {
            self.beta * tau * (-tau).exp()
        } else {
            // β e^{-τ} (1 - e^{-(β-1)τ}) / (β - 1)
            -self.beta * (-tau).exp() * (-a * tau).exp_m1() / a
        }
    }

    fn decay_rate(&self) -> f64 {
        self.beta
    }
}

pub fn kernel_w(x: f64, p: &ModelParams) -> f64 {
    DoubleExponential::from(p).w(x)
}

/// Post-synaptic function `α(t) = p(t) H(t)`.
pub fn alpha(t: f64, p: &ModelParams) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        p.beta * (-p.beta * t).exp()
    }
}

/// Half-width of the window around `β = 1` where the removable singularity of
/// `ψ` is evaluated through its first-order limit.
pub const BETA_ONE_WINDOW: f64 = 1e-6;

/// `ψ(X) = p(0) + ∫_0^X e^s p'(s) ds` as a function of `X = y/c - T_ji ≥ 0`.
pub fn psi_of_offset(offset: f64, beta: f64) -> f64 {
    let a = beta - 1.0;
    if a.abs() < BETA_ONE_WINDOW {
        beta - beta * beta * offset
    } else {
        // β + β² (e^{(1-β)X} - 1) / (β - 1)
        beta + beta * beta * (-a * offset).exp_m1() / a
    }
}

/// Stability integrand `ψ_ij(y)`, defined for `y ≥ c T_ji` with `T_ji = T_j - T_i`.
///
/// Indices are zero-based.
pub fn psi(i: usize, j: usize, y: f64, wave: &CoarseWave, p: &ModelParams) -> Result<f64> {
    let t_ji = wave.t[j] - wave.t[i];
    let offset = y / wave.c - t_ji;
    if offset < -1e-12 * (1.0 + t_ji.abs()) {
        return Err(Error::Domain(format!(
            "psi({i},{j}) needs y >= c T_ji = {}, got {y}",
            wave.c * t_ji
        )));
    }
    Ok(psi_of_offset(offset.max(0.0), p.beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_at_origin_and_evenness() {
        let p = ModelParams::default();
        assert_eq!(kernel_w(0.0, &p), 4.0);
        for &x in &[-2.0, -0.5, 0.3, 1.7] {
            assert_eq!(kernel_w(x, &p), kernel_w(-x, &p));
        }
    }

    #[test]
    fn alpha_gate_and_initial_value() {
        let p = ModelParams::default();
        assert_eq!(alpha(-1.0, &p), 0.0);
        assert_eq!(alpha(0.0, &p), 4.5);
        // ∫_0^∞ α = 1 by the trapezoid-free closed form of the exponential.
        let integral = quadrature::integrate(|t| alpha(t, &p), 0.0, 20.0, 1e-12).integral;
        assert!((integral - 1.0).abs() < 1e-10);
    }

    #[test]
    fn psi_at_lower_limit_is_beta() {
        let p = ModelParams::default().with_beta(10.0);
        let wave = CoarseWave::new(2.0, vec![0.0, 0.3, 0.5]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let y = wave.c * (wave.t[j] - wave.t[i]);
                assert!((psi(i, j, y, &wave, &p).unwrap() - 10.0).abs() < 1e-12);
            }
        }
        assert!(psi(0, 2, 0.0, &wave, &p).is_err());
    }

    #[test]
    fn psi_matches_its_defining_integral() {
        for &beta in &[0.4, 2.0, 10.0] {
            let syn = ExponentialSynapse { beta };
            for &x in &[0.1, 1.0, 3.0] {
                let q = quadrature::integrate(|s| s.exp() * syn.dp(s), 0.0, x, 1e-13).integral;
                assert!((psi_of_offset(x, beta) - (beta + q)).abs() < 1e-9, "{beta} {x}");
            }
        }
    }

    #[test]
    fn psi_beta_one_branch_is_continuous() {
        let x = 2.0;
        let at_one = psi_of_offset(x, 1.0);
        assert_eq!(at_one, 1.0 - x);
        for &b in &[1.0 - 1e-6, 1.0 + 1e-6, 1.0 - 2e-6, 1.0 + 2e-6] {
            assert!((psi_of_offset(x, b) - at_one).abs() < 1e-4);
        }
    }

    #[test]
    fn weighted_psi_is_bounded() {
        // e^{-y/c}|ψ_ij(y)| ≤ 2 max(K_p, K_p') max e^{-T_ji}
        let p = ModelParams::default().with_beta(10.0);
        let wave = CoarseWave::new(1.5, vec![0.0, 0.2, 0.45]).unwrap();
        let kp = p.beta.max(p.beta * p.beta);
        let mut max_weight: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                max_weight = max_weight.max((-(wave.t[j] - wave.t[i])).exp());
            }
        }
        let bound = 2.0 * kp * max_weight;
        for i in 0..3 {
            for j in 0..3 {
                let y0 = wave.c * (wave.t[j] - wave.t[i]);
                for k in 0..=500 {
                    let y = y0 + 0.1 * k as f64;
                    let v = (-y / wave.c).exp() * psi(i, j, y, &wave, &p).unwrap().abs();
                    assert!(v <= bound, "{i} {j} {y}: {v} > {bound}");
                }
            }
        }
    }
}
