use proptest::prelude::*;

use spikewave::difm::{
    count_fronts, initial_state, loglog_slope, simulate, speed_stats, InitialCondition, LevelSample, Network,
    SamplingOptions,
};
use spikewave::families::fast_tw1;
use spikewave::params::{ModelParams, Numerics};
use spikewave::parallel::ExecutionMode;
use spikewave::wave::CoarseWave;

fn tw1() -> CoarseWave {
    fast_tw1(&ModelParams::default(), &Numerics::default()).unwrap().wave
}

fn small_network(n: usize) -> ModelParams {
    let mut p = ModelParams::default();
    p.domain.n = n;
    p.domain.half_width = 2.0;
    p
}

#[test]
fn runs_repeat_exactly_in_both_modes() {
    let p = small_network(200);
    let init = InitialCondition::Wave { wave: tw1(), shift: 0.0 };
    let sampling = SamplingOptions { interval: 0.1, snapshot_every: 5, ..Default::default() };
    let a = simulate(&init, &p, 10.0, &sampling, ExecutionMode::Sequential).unwrap();
    let b = simulate(&init, &p, 10.0, &sampling, ExecutionMode::Sequential).unwrap();
    let c = simulate(&init, &p, 10.0, &sampling, ExecutionMode::Parallel).unwrap();
    assert!(!a.events.is_empty());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn sampling_does_not_change_the_events() {
    let p = small_network(150);
    let init = InitialCondition::Wave { wave: tw1(), shift: 0.3 };
    let none = SamplingOptions { interval: 0.0, ..Default::default() };
    let dense = SamplingOptions { interval: 0.01, ..Default::default() };
    let a = simulate(&init, &p, 8.0, &none, ExecutionMode::Sequential).unwrap();
    let b = simulate(&init, &p, 8.0, &dense, ExecutionMode::Sequential).unwrap();
    assert_eq!(a.events, b.events);
    assert_eq!(a.final_state, b.final_state);
}

#[test]
fn seeded_single_spike_wave_keeps_one_front_at_its_speed() {
    let p = small_network(400);
    let wave = tw1();
    let c = wave.c;
    let init = InitialCondition::Wave { wave, shift: 0.0 };
    let sampling = SamplingOptions { interval: 0.5, stats_from: 5.0, ..Default::default() };
    let traj = simulate(&init, &p, 30.0, &sampling, ExecutionMode::default()).unwrap();
    assert_eq!(count_fronts(&traj, 10.0, 30.0, 1.0).fronts, 1);
    let s = traj.speed_stats.unwrap();
    assert!((s.c_bar - c).abs() < 0.02, "c_bar = {}, c = {c}", s.c_bar);
}

#[test]
fn supra_threshold_initial_voltage_is_rejected() {
    let p = small_network(10);
    let net = Network::new(&p, ExecutionMode::Sequential).unwrap();
    let init = InitialCondition::Uniform { v0: 1.0, s0: 0.0 };
    assert!(initial_state(&init, &net).is_err());
}

#[test]
fn random_initial_conditions_depend_only_on_the_seed() {
    let p = small_network(50);
    let net = Network::new(&p, ExecutionMode::Sequential).unwrap();
    let init = |seed| InitialCondition::Random { seed, v_min: 0.0, v_max: 1.0, s0: 0.0 };
    let (a, _) = initial_state(&init(7), &net).unwrap();
    let (b, _) = initial_state(&init(7), &net).unwrap();
    let (c, _) = initial_state(&init(8), &net).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn speed_statistics_of_a_uniform_track() {
    let track: Vec<LevelSample> = (0..=20).map(|k| LevelSample { t: 0.5 * k as f64, z: Some(0.25 * k as f64) }).collect();
    let s = speed_stats(&track, 0.0).unwrap();
    assert!((s.c_bar - 0.5).abs() < 1e-12);
    assert!(s.sigma_c < 1e-12);
    assert_eq!(s.samples.len(), 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loglog_slope_recovers_power_laws(k in 0.01..10.0f64, e in -3.0..3.0f64) {
        let pts: Vec<(f64, f64)> = [250.0, 500.0, 1000.0, 2000.0].iter().map(|&n: &f64| (n, k * n.powf(e))).collect();
        let (slope, _) = loglog_slope(&pts).unwrap();
        prop_assert!((slope - e).abs() < 1e-9);
    }
}
