//! Construction of the wave families used by the experiments.
//!
//! Single- and two-spike waves come from a guess scan. Waves with three or more
//! spikes come from the grazing chain: `TW_3` is continued down in β to its
//! grazing point, the grazing point of `m + 1` spikes is bootstrapped from that
//! of `m`, and each `TW_m` is then continued up in β from its grazing point.

use serde::{Deserialize, Serialize};

use crate::continuation::{
    bootstrap_grazing_guess, continue_branch, solve_grazing, Branch, ContinuationOptions, EventKind, GrazingPoint,
};
use crate::error::{Error, Result};
use crate::params::{ModelParams, Numerics};
use crate::parallel::ExecutionMode;
use crate::solver::{compatibility_m1, scan_guesses, solve_wave, SolveOptions, WaveRecord};
use crate::wave::CoarseWave;

/// Waves slower than this belong to the slow families and are skipped by
/// [`compact_wave`].
pub const SLOW_SPEED: f64 = 0.05;

pub const SCAN_SPEEDS: [f64; 7] = [0.1, 0.2, 0.3, 0.4, 0.6, 1.0, 2.0];
pub const SCAN_SPACINGS: [f64; 6] = [0.05, 0.1, 0.2, 0.4, 0.7, 1.0];

/// β at which the reference `TW_3` is computed.
pub const TW3_BETA: f64 = 10.0;

/// Roots of the single-spike speed condition on a geometric grid of `c` in
/// `[c_min, c_max]`, polished by Newton; fastest first.
pub fn tw1_speeds(p: &ModelParams, c_min: f64, c_max: f64, samples: usize, opts: &SolveOptions) -> Vec<WaveRecord> {
    let ratio = (c_max / c_min).powf(1.0 / (samples.max(2) - 1) as f64);
    let grid: Vec<f64> = (0..samples.max(2)).map(|k| c_max / ratio.powi(k as i32)).collect();
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (compatibility_m1(w[0], p), compatibility_m1(w[1], p));
        if (a > 0.0) != (b > 0.0) {
            let guess = CoarseWave { c: (w[0] * w[1]).sqrt(), t: vec![0.0] };
            if let Ok(rec) = solve_wave(1, &guess, p, opts) {
                if rec.validated && !out.iter().any(|r: &WaveRecord| (r.wave.c - rec.wave.c).abs() < 1e-9) {
                    out.push(rec);
                }
            }
        }
    }
    out
}

/// The fast single-spike wave.
pub fn fast_tw1(p: &ModelParams, numerics: &Numerics) -> Result<WaveRecord> {
    tw1_speeds(p, 1e-3, 50.0, 400, &SolveOptions::from(*numerics))
        .into_iter()
        .next()
        .ok_or_else(|| Error::NoConvergence { iterations: 0, residual: f64::NAN })
}

/// The narrowest validated `m`-spike wave faster than [`SLOW_SPEED`] found by
/// the default guess scan. Wide solutions are composites or decoupled spikes.
pub fn compact_wave(m: usize, p: &ModelParams, numerics: &Numerics, mode: ExecutionMode) -> Result<WaveRecord> {
    let found = scan_guesses(m, p, &SCAN_SPEEDS, &SCAN_SPACINGS, &SolveOptions::from(*numerics), mode);
    found
        .into_iter()
        .filter(|r| r.wave.c >= SLOW_SPEED)
        .min_by(|a, b| a.wave.width().total_cmp(&b.wave.width()))
        .ok_or_else(|| Error::NoConvergence { iterations: 0, residual: f64::NAN })
}

/// The compact `TW_3` at `β = 10`.
pub fn tw3_reference(p: &ModelParams, numerics: &Numerics, mode: ExecutionMode) -> Result<WaveRecord> {
    compact_wave(3, &p.with_beta(TW3_BETA), numerics, mode)
}

/// Continues `TW_3` down in β and refines the grazing point that ends the branch.
pub fn tw3_grazing(p: &ModelParams, numerics: &Numerics, mode: ExecutionMode) -> Result<(Branch, GrazingPoint)> {
    let start = tw3_reference(p, numerics, mode)?;
    let opts = ContinuationOptions { direction: -1.0, detect_hopf: false, ..Default::default() };
    let branch = continue_branch(&start, p, &opts, numerics, mode)?;
    let event = branch
        .events_of(EventKind::Grazing)
        .next()
        .ok_or_else(|| Error::Domain(format!("TW_3 branch ended without grazing ({:?})", branch.termination)))?;
    let t_g = event.t_g.ok_or_else(|| Error::Domain("grazing event has no tangency offset".into()))?;
    let g = solve_grazing(&event.wave, t_g, event.beta, p, numerics)?;
    Ok((branch, g))
}

/// Grazing points for `m = first.m, .., m_max`; stops early if a solve fails.
pub fn grazing_chain(first: &GrazingPoint, m_max: usize, p: &ModelParams, numerics: &Numerics) -> Vec<GrazingPoint> {
    let mut chain = vec![first.clone()];
    while let Some(last) = chain.last().filter(|g| g.wave.m() < m_max) {
        let (guess, t_g) = bootstrap_grazing_guess(last);
        match solve_grazing(&guess, t_g, last.beta_g, p, numerics) {
            Ok(g) => chain.push(g),
            Err(_) => break,
        }
    }
    chain
}

/// Options for following a branch up from its grazing point to `beta`.
pub fn ascent_options(beta: f64, detect_hopf: bool) -> ContinuationOptions {
    ContinuationOptions {
        step: 0.02,
        step_max: 0.25,
        direction: 1.0,
        max_points: 2000,
        beta_max: beta,
        detect_hopf,
        ..Default::default()
    }
}

/// Follows the branch born at grazing point `g` up to `beta` and solves there.
pub fn wave_above_grazing(
    g: &GrazingPoint,
    beta: f64,
    p: &ModelParams,
    numerics: &Numerics,
    mode: ExecutionMode,
) -> Result<WaveRecord> {
    if beta < g.beta_g {
        return Err(Error::Domain(format!("β = {beta} lies below the grazing point β_G = {}", g.beta_g)));
    }
    let start = WaveRecord { wave: g.wave.clone(), beta: g.beta_g, residual: g.residual, validated: true, secondary_max: None };
    let branch = continue_branch(&start, p, &ascent_options(beta, false), numerics, mode)?;
    wave_on_branch(&branch, beta, p, numerics)
}

/// Interpolates a branch at `beta` and polishes with Newton.
pub fn wave_on_branch(branch: &Branch, beta: f64, p: &ModelParams, numerics: &Numerics) -> Result<WaveRecord> {
    let pts = &branch.points;
    let k = pts
        .windows(2)
        .position(|w| (w[0].beta - beta) * (w[1].beta - beta) <= 0.0)
        .ok_or_else(|| Error::Domain(format!("branch of TW_{} does not reach β = {beta} ({:?})", branch.m, branch.termination)))?;
    let (a, b) = (&pts[k], &pts[k + 1]);
    let s = if b.beta == a.beta { 0.0 } else { (beta - a.beta) / (b.beta - a.beta) };
    let c = a.wave.c + s * (b.wave.c - a.wave.c);
    let t = a.wave.t.iter().zip(&b.wave.t).map(|(x, y)| x + s * (y - x)).collect();
    let guess = CoarseWave::new(c, t)?;
    let rec = solve_wave(branch.m, &guess, &p.with_beta(beta), &SolveOptions::from(*numerics))?;
    if !rec.validated {
        return Err(Error::Domain(format!("TW_{} at β = {beta} is not sub-threshold", branch.m)));
    }
    Ok(rec)
}

/// Waves `TW_1, .., TW_m_max` at one β, built as described in the module docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub beta: f64,
    pub waves: Vec<WaveRecord>,
    pub grazing: Vec<GrazingPoint>,
}

pub fn nested_family(beta: f64, m_max: usize, p: &ModelParams, numerics: &Numerics, mode: ExecutionMode) -> Result<Family> {
    let pb = p.with_beta(beta);
    let mut waves = vec![fast_tw1(&pb, numerics)?];
    if m_max >= 2 {
        waves.push(compact_wave(2, &pb, numerics, mode)?);
    }
    let mut grazing = Vec::new();
    if m_max >= 3 {
        let (_, g3) = tw3_grazing(p, numerics, mode)?;
        grazing = grazing_chain(&g3, m_max, p, numerics);
        if grazing.len() + 2 < m_max {
            return Err(Error::Domain(format!("grazing chain stopped at m = {}", grazing.len() + 2)));
        }
        let above = mode.map(&grazing, |g| wave_above_grazing(g, beta, p, numerics, ExecutionMode::Sequential));
        for w in above {
            waves.push(w?);
        }
    }
    Ok(Family { beta, waves, grazing })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tw1_roots_solve_the_speed_condition() {
        let p = ModelParams::default().with_beta(4.5);
        let roots = tw1_speeds(&p, 1e-3, 50.0, 400, &SolveOptions::default());
        assert!(!roots.is_empty());
        for r in &roots {
            assert!(compatibility_m1(r.wave.c, &p).abs() < 1e-10);
        }
        assert!(roots.windows(2).all(|w| w[0].wave.c > w[1].wave.c));
    }
}
