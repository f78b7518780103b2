//! Closed-form travelling-wave profiles.
//!
//! For spike offset `u = ξ - c T_j` and one kernel term `A e^{-b|x|}`, with
//! `κ = β/c` and `ρ = 1/c`, the per-spike synaptic profile is
//!
//! ```text
//! G(u) = A κ e^{b u} / (b + κ)                           u ≤ 0
//!      = A κ [ dd(κ, b; u) + e^{-κ u} / (b + κ) ]        u > 0
//! ```
//!
//! and its leaky integral `F(u) = ∫_{-∞}^u e^{ρ(z-u)} G(z) dz` is
//!
//! ```text
//! F(u) = A κ e^{b u} / ((b + κ)(b + ρ))                                          u ≤ 0
//!      = A κ [ e^{-ρu} / ((b+κ)(b+ρ)) + f[κ, ρ, b](u) + dd(κ, ρ; u) / (b + κ) ]   u > 0
//! ```
//!
//! where `dd` and `f[..]` are the exponential divided differences of
//! [`crate::expo`]. The voltage profile is `ν = I + Σ_j (F(u_j) - e^{-ρ u_j} H(u_j))`
//! with the reset of spike `j` excluded at `u_j = 0`, so `ν(c T_i)` is the left
//! limit `ν(c T_i⁻)`.

use crate::expo::{exp_dd1, exp_dd2};
use crate::params::ModelParams;
use crate::wave::{CoarseWave, ProfileSample};

#[derive(Debug, Clone, Copy)]
struct Rates {
    kappa: f64,
    rho: f64,
}

impl Rates {
    fn new(c: f64, beta: f64) -> Self {
        Self { kappa: beta / c, rho: 1.0 / c }
    }
}

fn synaptic_term(u: f64, amp: f64, b: f64, r: Rates) -> f64 {
    let k = r.kappa;
    if u <= 0.0 {
        amp * k * (b * u).exp() / (b + k)
    } else {
        amp * k * (exp_dd1(k, b, u) + (-k * u).exp() / (b + k))
    }
}

fn leaky_term(u: f64, amp: f64, b: f64, r: Rates) -> f64 {
    let (k, rho) = (r.kappa, r.rho);
    if u <= 0.0 {
        amp * k * (b * u).exp() / ((b + k) * (b + rho))
    } else {
        amp * k
            * ((-rho * u).exp() / ((b + k) * (b + rho))
                + exp_dd2(k, rho, b, u)
                + exp_dd1(k, rho, u) / (b + k))
    }
}

/// Voltage profile `ν_m(ξ; c, T)`; at `ξ = c T_i` returns the left limit.
pub fn profile_nu(xi: f64, wave: &CoarseWave, p: &ModelParams) -> f64 {
    let r = Rates::new(wave.c, p.beta);
    let terms = p.kernel_terms();
    let mut nu = p.drive;
    for xj in wave.crossings() {
        let u = xi - xj;
        if u > 0.0 {
            nu -= (-r.rho * u).exp();
        }
        for &(amp, b) in &terms {
            if amp != 0.0 {
                nu += leaky_term(u, amp, b, r);
            }
        }
    }
    nu
}

/// Synaptic profile `σ_m(ξ) = (1/c) Σ_j ∫_0^∞ w(y - ξ + c T_j) p(y/c) dy`.
pub fn profile_sigma(xi: f64, wave: &CoarseWave, p: &ModelParams) -> f64 {
    let r = Rates::new(wave.c, p.beta);
    let terms = p.kernel_terms();
    wave.crossings()
        .map(|xj| {
            terms
                .iter()
                .filter(|(amp, _)| *amp != 0.0)
                .map(|&(amp, b)| synaptic_term(xi - xj, amp, b, r))
                .sum::<f64>()
        })
        .sum()
}

/// Synaptic input seen by a neuron at comoving position `ξ`: `c σ_m(ξ)`.
pub fn synaptic_input(xi: f64, wave: &CoarseWave, p: &ModelParams) -> f64 {
    wave.c * profile_sigma(xi, wave, p)
}

/// `dν/dξ` from the profile equation `c ν' = I - ν + c σ` (left derivative at crossings).
pub fn profile_slope(xi: f64, wave: &CoarseWave, p: &ModelParams) -> f64 {
    (p.drive - profile_nu(xi, wave, p)) / wave.c + profile_sigma(xi, wave, p)
}

/// `ν(c T_i⁻)` for every spike.
pub fn threshold_values(wave: &CoarseWave, p: &ModelParams) -> Vec<f64> {
    wave.crossings().map(|x| profile_nu(x, wave, p)).collect()
}

/// Uniform samples of `(ξ, ν, σ)` on `[xi_min, xi_max]`.
pub fn sample_profile(
    wave: &CoarseWave,
    p: &ModelParams,
    xi_min: f64,
    xi_max: f64,
    count: usize,
) -> Vec<ProfileSample> {
    let count = count.max(2);
    let h = (xi_max - xi_min) / (count - 1) as f64;
    (0..count)
        .map(|k| {
            let xi = xi_min + h * k as f64;
            ProfileSample { xi, nu: profile_nu(xi, wave, p), sigma: profile_sigma(xi, wave, p) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tw3() -> (CoarseWave, ModelParams) {
        (CoarseWave::new(2.2, vec![0.0, 0.17, 0.41]).unwrap(), ModelParams::default())
    }

    #[test]
    fn far_field_limits() {
        let (w, p) = tw3();
        assert!((profile_nu(-80.0, &w, &p) - p.drive).abs() < 1e-12);
        assert!(profile_sigma(-80.0, &w, &p).abs() < 1e-12);
        assert!(profile_sigma(400.0, &w, &p).abs() < 1e-12);
        assert!((profile_nu(400.0, &w, &p) - p.drive).abs() < 1e-12);
    }

    #[test]
    fn reset_jump_is_one() {
        let (w, p) = tw3();
        for x in w.crossings() {
            let left = profile_nu(x, &w, &p);
            let right = profile_nu(x + 1e-13, &w, &p);
            assert!((left - right - 1.0).abs() < 1e-9, "jump {}", left - right);
            let before = profile_nu(x - 1e-10, &w, &p);
            assert!((left - before).abs() < 1e-8);
        }
    }

    #[test]
    fn sigma_is_continuous_at_crossings() {
        let (w, p) = tw3();
        for x in w.crossings() {
            let a = profile_sigma(x - 1e-11, &w, &p);
            let b = profile_sigma(x + 1e-11, &w, &p);
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn slope_matches_central_difference() {
        let (w, p) = tw3();
        for &xi in &[-0.7, 0.05, 0.3, 1.4, 3.0] {
            let h = 1e-6;
            let fd = (profile_nu(xi + h, &w, &p) - profile_nu(xi - h, &w, &p)) / (2.0 * h);
            assert!((fd - profile_slope(xi, &w, &p)).abs() < 1e-6, "{xi}");
        }
    }

    #[test]
    fn coincident_rates_are_smooth() {
        // β = 1 (κ = ρ), β = b1 c (κ = b1), c = 1/b2 (ρ = b2).
        let p = ModelParams::default();
        let xs = [-0.3, 0.2, 0.9, 2.5];
        for (c, beta) in [(1.3, 1.0), (1.0, 5.0), (1.0 / 3.5, 2.0)] {
            let w = CoarseWave::new(c, vec![0.0, 0.2]).unwrap();
            for &xi in &xs {
                let at = profile_nu(xi, &w, &p.with_beta(beta));
                let near = profile_nu(xi, &w, &p.with_beta(beta * (1.0 + 1e-9)));
                assert!(at.is_finite());
                assert!((at - near).abs() < 1e-7, "c={c} beta={beta} xi={xi}");
            }
        }
    }
}
