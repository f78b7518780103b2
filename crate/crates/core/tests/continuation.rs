use spikewave::continuation::{
    bootstrap_grazing_guess, continue_branch, gain_curve, grazing_residual_norm, ContinuationOptions, EventKind, Termination,
};
use spikewave::families::{grazing_chain, tw3_grazing, tw3_reference, wave_on_branch, TW3_BETA};
use spikewave::params::{ModelParams, Numerics};
use spikewave::parallel::ExecutionMode;
use spikewave::solver::threshold_residual_norm;

#[test]
fn tw3_branch_ends_at_a_grazing_point_below_the_reference() {
    let p = ModelParams::default();
    let numerics = Numerics::default();
    let (branch, g) = tw3_grazing(&p, &numerics, ExecutionMode::default()).unwrap();
    assert_eq!(branch.termination, Termination::Grazing);
    assert!(g.beta_g > 2.17 && g.beta_g < TW3_BETA);
    assert!(grazing_residual_norm(&g, &p).unwrap() < 1e-9);
    // Tangency lies behind the last spike.
    assert!(g.t_g > g.wave.t[2]);
    assert!(branch.points.iter().all(|pt| pt.validated));
}

#[test]
fn bootstrapped_grazing_points_gain_one_spike_each() {
    let p = ModelParams::default();
    let numerics = Numerics::default();
    let (_, g3) = tw3_grazing(&p, &numerics, ExecutionMode::default()).unwrap();
    let (guess, t_g) = bootstrap_grazing_guess(&g3);
    assert_eq!(guess.m(), 4);
    assert_eq!(t_g, g3.t_g);
    let chain = grazing_chain(&g3, 8, &p, &numerics);
    assert_eq!(chain.iter().map(|g| g.wave.m()).collect::<Vec<_>>(), (3..=8).collect::<Vec<_>>());
    for g in &chain {
        assert!(grazing_residual_norm(g, &p).unwrap() < 1e-9);
    }
    let gain = gain_curve(&chain.last().unwrap().wave);
    assert_eq!(gain.len(), 7);
    assert!(gain.iter().all(|(_, r)| *r > 0.0));
}

#[test]
fn points_interpolated_on_a_branch_solve_the_wave_system() {
    let p = ModelParams::default();
    let numerics = Numerics::default();
    let tw3 = tw3_reference(&p, &numerics, ExecutionMode::default()).unwrap();
    let opts = ContinuationOptions { beta_max: 12.0, detect_hopf: false, ..Default::default() };
    let branch = continue_branch(&tw3, &p, &opts, &numerics, ExecutionMode::default()).unwrap();
    assert_eq!(branch.termination, Termination::BetaBound);
    assert!(branch.events_of(EventKind::Hopf).next().is_none());
    let rec = wave_on_branch(&branch, 11.0, &p, &numerics).unwrap();
    assert!(threshold_residual_norm(&rec.wave, &p.with_beta(11.0)) < 1e-10);
    // The tangent is a unit vector at every point.
    for pt in &branch.points {
        let norm: f64 = pt.tangent.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
