//! Closed forms against the quadrature and Runge–Kutta references.

use num_complex::Complex64;
use proptest::prelude::*;

use spikewave::difm::{next_event, propagate, Network, NetworkState};
use spikewave::expo::{exp_dd1, exp_dd2};
use spikewave::oracles::{bisect, quad_m, quad_nu, quad_sigma, rk_reference, QuadratureSpec};
use spikewave::params::ModelParams;
use spikewave::parallel::ExecutionMode;
use spikewave::profile::{profile_nu, profile_sigma};
use spikewave::solver::{solve_wave, SolveOptions};
use spikewave::stability::stability_entry_m;
use spikewave::wave::CoarseWave;

fn wave_strategy() -> impl Strategy<Value = CoarseWave> {
    (0.1..2.0f64, prop::collection::vec(0.1..1.0f64, 0..3)).prop_map(|(c, gaps)| {
        let mut t = vec![0.0];
        for g in gaps {
            let last = t[t.len() - 1];
            t.push(last + g);
        }
        CoarseWave { c, t }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profiles_match_quadrature(w in wave_strategy(), beta in 0.5..15.0f64, s in -1.0..1.5f64) {
        let p = ModelParams::default().with_beta(beta);
        let xi = s * (w.width() + 1.0);
        let spec = QuadratureSpec::default();
        prop_assert!((profile_nu(xi, &w, &p) - quad_nu(xi, &w, &p, &spec).unwrap()).abs() < 1e-8);
        prop_assert!((profile_sigma(xi, &w, &p) - quad_sigma(xi, &w, &p, &spec).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn stability_entries_match_quadrature(w in wave_strategy(), beta in 0.5..15.0f64, re in -1.0..1.0f64, im in 0.0..20.0f64) {
        let p = ModelParams::default().with_beta(beta);
        let z = Complex64::new(re, im);
        let spec = QuadratureSpec::default();
        let m = w.m();
        for i in 0..m {
            for j in 0..m {
                let d = stability_entry_m(i, j, z, &w, &p).unwrap() - quad_m(i, j, z, &w, &p, &spec).unwrap();
                prop_assert!(d.norm() < 1e-8, "M[{i}][{j}] off by {}", d.norm());
            }
        }
    }

    #[test]
    fn divided_differences_are_symmetric_and_continuous(a in 0.0..5.0f64, d in -1.0..1.0f64, u in 0.0..4.0f64) {
        let b = a + d;
        prop_assume!(b >= 0.0);
        prop_assert!((exp_dd1(a, b, u) - exp_dd1(b, a, u)).abs() <= 1e-14);
        // Approaching coincident nodes from a distance of 1e-7.
        let near = exp_dd1(a, a + 1e-7, u);
        prop_assert!((near - u * (-a * u).exp()).abs() < 1e-6);
        let second = exp_dd2(a, a + 1e-7, a + 2e-7, u);
        prop_assert!((second - 0.5 * u * u * (-a * u).exp()).abs() < 1e-5);
    }

    #[test]
    fn propagator_matches_runge_kutta(seed in 0u64..1000, beta in 0.5..12.0f64) {
        let mut p = ModelParams::default().with_beta(beta);
        p.domain.n = 12;
        let net = Network::new(&p, ExecutionMode::Sequential).unwrap();
        let v: Vec<f64> = (0..12).map(|i| 0.3 * (((seed + i) % 7) as f64) / 7.0).collect();
        let s: Vec<f64> = (0..12).map(|i| 0.02 * (((seed * 3 + i) % 5) as f64)).collect();
        let state = NetworkState { t: 0.0, v, s };
        prop_assume!(next_event(&state, &net, 0.5).is_none());
        let reference = rk_reference(&state, &net, &[0.25, 0.5]).unwrap();
        let mut exact = state.clone();
        propagate(&mut exact, &net, 0.25);
        let d1 = exact.v.iter().zip(&reference[0].v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        propagate(&mut exact, &net, 0.25);
        let d2 = exact.s.iter().zip(&reference[1].s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(d1 < 1e-9 && d2 < 1e-9);
    }
}

#[test]
fn bisection_finds_a_simple_root() {
    let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
    assert!((r - 2f64.sqrt()).abs() < 1e-13);
    assert!(bisect(|x| Ok(x * x + 1.0), 0.0, 2.0, 1e-14).is_err());
}

#[test]
fn solved_tw1_sits_on_its_profile_threshold() {
    let p = ModelParams::default();
    let guess = CoarseWave::new(0.7, vec![0.0]).unwrap();
    let rec = solve_wave(1, &guess, &p, &SolveOptions::default()).unwrap();
    assert!((profile_nu(0.0, &rec.wave, &p) - 1.0).abs() < 1e-10);
}
