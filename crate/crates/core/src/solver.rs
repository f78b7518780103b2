//! Travelling-wave solver: threshold conditions, sub-threshold validation and
//! the scalar speed condition of single-spike waves.

use serde::{Deserialize, Serialize};

use crate::difm::NetworkTrajectory;
use crate::error::{Error, Result};
use crate::newton::{damped_newton, max_norm, NewtonOptions};
use crate::params::{ModelParams, Numerics};
use crate::parallel::ExecutionMode;
use crate::profile::{profile_nu, profile_slope};
use crate::wave::CoarseWave;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationGrid {
    pub xi_min: f64,
    pub xi_max: f64,
    pub count: usize,
}

impl ValidationGrid {
    /// `[-0.5 w - 5, 2 w + 5]` with 4001 points, `w = c T_m`.
    pub fn around(wave: &CoarseWave) -> Self {
        let w = wave.width();
        Self { xi_min: -0.5 * w - 5.0, xi_max: 2.0 * w + 5.0, count: 4001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub newton_tol: f64,
    pub max_iter: usize,
    /// `None` selects [`ValidationGrid::around`] the converged wave.
    pub validation_grid: Option<ValidationGrid>,
    pub threshold_margin: f64,
    pub finite_diff_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Numerics::default().into()
    }
}

impl From<Numerics> for SolveOptions {
    fn from(n: Numerics) -> Self {
        Self {
            newton_tol: n.newton_tol,
            max_iter: n.max_iter,
            validation_grid: None,
            threshold_margin: n.threshold_margin,
            finite_diff_step: n.finite_diff_step,
        }
    }
}

impl SolveOptions {
    pub(crate) fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton_tol,
            max_iter: self.max_iter,
            fd_step: self.finite_diff_step,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondaryMax {
    pub xi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveRecord {
    #[serde(flatten)]
    pub wave: CoarseWave,
    pub beta: f64,
    pub residual: f64,
    pub validated: bool,
    pub secondary_max: Option<SecondaryMax>,
}

/// `ν(c T_i⁻) - 1` for every spike.
pub fn threshold_residuals(wave: &CoarseWave, p: &ModelParams) -> Vec<f64> {
    wave.crossings().map(|x| profile_nu(x, wave, p) - 1.0).collect()
}

/// `c > 0` and strictly increasing offsets, as an unknown vector `(c, T_2..T_m)`.
pub(crate) fn admissible_unknowns(x: &[f64]) -> bool {
    x[0] > 0.0
        && x[0].is_finite()
        && x[1..].first().map_or(true, |&t2| t2 > 0.0)
        && x[1..].windows(2).all(|w| w[1] > w[0])
}

/// Solves the `m` threshold conditions for `(c, T_2..T_m)` and validates the
/// profile below threshold.
pub fn solve_wave(m: usize, guess: &CoarseWave, p: &ModelParams, opts: &SolveOptions) -> Result<WaveRecord> {
    if guess.m() != m {
        return Err(Error::InvalidParams(format!("guess has {} spikes, expected {m}", guess.m())));
    }
    guess.check()?;
    let f = |x: &[f64]| Ok(threshold_residuals(&CoarseWave::from_unknowns(x), p));
    let out = damped_newton(f, admissible_unknowns, &guess.to_unknowns(), opts.newton())?;
    let wave = CoarseWave::from_unknowns(&out.x);
    Ok(validate(wave, p, out.residual, opts))
}

/// Wraps a converged wave into a record, running the sub-threshold check.
pub fn validate(wave: CoarseWave, p: &ModelParams, residual: f64, opts: &SolveOptions) -> WaveRecord {
    let grid = opts.validation_grid.unwrap_or_else(|| ValidationGrid::around(&wave));
    let validated = subthreshold_on_grid(&wave, p, &grid, opts.threshold_margin);
    let secondary_max = secondary_maximum(&wave, p, wave.width(), grid.xi_max, grid.count);
    WaveRecord { wave, beta: p.beta, residual, validated, secondary_max }
}

/// `ν < 1 - margin` on the grid, except in `[c T_j - r, c T_j]` with `r = 1e-6 c`.
pub fn subthreshold_on_grid(wave: &CoarseWave, p: &ModelParams, grid: &ValidationGrid, margin: f64) -> bool {
    let radius = 1e-6 * wave.c;
    let crossings: Vec<f64> = wave.crossings().collect();
    let h = (grid.xi_max - grid.xi_min) / (grid.count.max(2) - 1) as f64;
    (0..grid.count.max(2)).all(|k| {
        let xi = grid.xi_min + h * k as f64;
        let excluded = crossings.iter().any(|&x| xi >= x - radius && xi <= x);
        excluded || profile_nu(xi, wave, p) < 1.0 - margin
    })
}

/// Largest local maximum of `ν` on `(xi_lo, xi_hi)`, refined to a root of `ν'`.
pub fn secondary_maximum(
    wave: &CoarseWave,
    p: &ModelParams,
    xi_lo: f64,
    xi_hi: f64,
    count: usize,
) -> Option<SecondaryMax> {
    let count = count.max(3);
    let h = (xi_hi - xi_lo) / (count - 1) as f64;
    // Skip the left endpoint, where ν jumps down after the reset.
    let slope_at = |xi: f64| profile_slope(xi, wave, p);
    let mut best: Option<SecondaryMax> = None;
    let mut prev_x = xi_lo + 0.5 * h;
    let mut prev_s = slope_at(prev_x);
    for k in 1..count {
        let x = xi_lo + h * k as f64;
        let s = slope_at(x);
        if prev_s > 0.0 && s <= 0.0 {
            let xm = bisect_sign_change(&slope_at, prev_x, x, prev_s);
            let v = profile_nu(xm, wave, p);
            if best.map_or(true, |b| v > b.value) {
                best = Some(SecondaryMax { xi: xm, value: v });
            }
        }
        prev_x = x;
        prev_s = s;
    }
    best
}

fn bisect_sign_change(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if (f(mid) > 0.0) == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Maximum of `ν` on `(c T_m, c T_m + span]`: the grazing monitor is `1 -` this value.
pub fn trailing_maximum(wave: &CoarseWave, p: &ModelParams, span: f64, count: usize) -> f64 {
    let lo = wave.width();
    let hi = lo + span;
    let interior = secondary_maximum(wave, p, lo, hi, count).map(|s| s.value);
    let edge = profile_nu(hi, wave, p);
    interior.map_or(edge, |v| v.max(edge))
}

/// Speed condition of single-spike waves, `ν(0⁻) - 1` for `m = 1`:
/// `Σ_k A_k β c / ((b_k c + β)(b_k c + 1)) - (1 - I)`.
pub fn compatibility_m1(c: f64, p: &ModelParams) -> f64 {
    let s: f64 = p
        .kernel_terms()
        .iter()
        .map(|&(a, b)| a * p.beta * c / ((b * c + p.beta) * (b * c + 1.0)))
        .sum();
    s - (1.0 - p.drive)
}

/// Concatenates spike groups separated by the given time gaps; the result
/// travels at the leading group's speed.
pub fn seed_composite(waves: &[CoarseWave], gaps: &[f64]) -> Result<CoarseWave> {
    let Some(first) = waves.first() else {
        return Err(Error::InvalidParams("no spike groups supplied".into()));
    };
    if gaps.len() + 1 != waves.len() {
        return Err(Error::InvalidParams(format!(
            "{} groups need {} gaps, got {}",
            waves.len(),
            waves.len() - 1,
            gaps.len()
        )));
    }
    if let Some(g) = gaps.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::OrderViolation(format!("group gap must be positive, got {g}")));
    }
    let mut t = first.t.clone();
    for (w, gap) in waves[1..].iter().zip(gaps) {
        let start = t[t.len() - 1] + gap;
        t.extend(w.t.iter().map(|x| start + x));
    }
    CoarseWave::new(first.c, t)
}

/// Estimates `(c, T)` of an `m`-spike wave from the last passage of a simulated
/// front.
///
/// The neuron of the latest firing marks the front; neurons behind it whose last
/// `m` firings form one burst (separated from the previous firing by more than
/// the burst's own spread) contribute their burst times. A common slope `1/c` and
/// one intercept per spike rank are fitted by least squares to
/// `τ_j(x) = x/c + T_j`, with `x` measured along the direction of travel.
pub fn seed_from_simulation(traj: &NetworkTrajectory, m: usize) -> Result<CoarseWave> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be positive".into()));
    }
    let n = traj.n;
    let last = traj
        .events
        .last()
        .ok_or_else(|| Error::InsufficientEvents("trajectory has no firing events".into()))?;
    let times = traj.firing_times();
    let latest = |i: usize| times[i].last().copied().unwrap_or(f64::NEG_INFINITY);
    let front = last.neuron;
    // The wake is on the side whose neighbour fired more recently.
    let behind: isize = if latest((front + n - 1) % n) >= latest((front + 1) % n) { -1 } else { 1 };
    let h = 2.0 * traj.half_width / n as f64;
    let mut rows: Vec<(f64, &[f64])> = Vec::new();
    for j in 0..n / 2 {
        let i = (front as isize + behind * j as isize).rem_euclid(n as isize) as usize;
        let ts = &times[i];
        if ts.len() < m {
            continue;
        }
        let burst = &ts[ts.len() - m..];
        let spread = burst[m - 1] - burst[0];
        let separated = ts.len() == m || burst[0] - ts[ts.len() - m - 1] > spread;
        if separated {
            rows.push((-(j as f64) * h, burst));
        }
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientEvents(format!(
            "only {} neurons behind the front carry a complete {m}-spike burst",
            rows.len()
        )));
    }
    // Normal equations for τ = s x + b_r: eliminate the intercepts rank by rank.
    let q = rows.len() as f64;
    let mean_x = rows.iter().map(|(x, _)| x).sum::<f64>() / q;
    let mean_t: Vec<f64> = (0..m).map(|r| rows.iter().map(|(_, b)| b[r]).sum::<f64>() / q).collect();
    let sxx: f64 = rows.iter().map(|(x, _)| (x - mean_x).powi(2)).sum::<f64>() * m as f64;
    let sxt: f64 = rows
        .iter()
        .map(|(x, b)| (0..m).map(|r| (x - mean_x) * (b[r] - mean_t[r])).sum::<f64>())
        .sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientEvents("all bursts at one position".into()));
    }
    let slope = sxt / sxx;
    if !(slope > 0.0) {
        return Err(Error::Fit(format!("firing times do not advance along the ring (slope {slope})")));
    }
    let intercepts: Vec<f64> = mean_t.iter().map(|t| t - slope * mean_x).collect();
    CoarseWave::new(1.0 / slope, intercepts)
}

/// Newton from every evenly spaced guess `(c, (0, d, 2d, ..))` on the product
/// grid; returns the distinct validated solutions, fastest first.
pub fn scan_guesses(
    m: usize,
    p: &ModelParams,
    speeds: &[f64],
    spacings: &[f64],
    opts: &SolveOptions,
    mode: ExecutionMode,
) -> Vec<WaveRecord> {
    let guesses: Vec<(f64, f64)> = speeds.iter().flat_map(|&c| spacings.iter().map(move |&d| (c, d))).collect();
    let solved = mode.map(&guesses, |&(c, d)| {
        let t = (0..m).map(|j| j as f64 * d).collect();
        CoarseWave::new(c, t).and_then(|g| solve_wave(m, &g, p, opts)).ok().filter(|r| r.validated)
    });
    let mut found: Vec<WaveRecord> = Vec::new();
    for rec in solved.into_iter().flatten() {
        let same = |r: &WaveRecord| {
            (r.wave.c - rec.wave.c).abs() < 1e-7 && r.wave.t.iter().zip(&rec.wave.t).all(|(a, b)| (a - b).abs() < 1e-6)
        };
        if !found.iter().any(same) {
            found.push(rec);
        }
    }
    found.sort_by(|a, b| b.wave.c.total_cmp(&a.wave.c));
    found
}

/// Residual norm of a wave, for diagnostics.
pub fn threshold_residual_norm(wave: &CoarseWave, p: &ModelParams) -> f64 {
    max_norm(&threshold_residuals(wave, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tw1_bracket(p: &ModelParams) -> (f64, f64) {
        // Scan for the fast root: residual positive at moderate c, negative far out.
        let mut prev = (50.0, compatibility_m1(50.0, p));
        let mut c = 50.0;
        while c > 0.05 {
            c *= 0.97;
            let r = compatibility_m1(c, p);
            if (r > 0.0) != (prev.1 > 0.0) {
                return (c, prev.0);
            }
            prev = (c, r);
        }
        panic!("no sign change");
    }

    #[test]
    fn single_spike_wave_matches_compatibility_root() {
        let p = ModelParams::default();
        let (lo, hi) = tw1_bracket(&p);
        let guess = CoarseWave::new(0.5 * (lo + hi), vec![0.0]).unwrap();
        let rec = solve_wave(1, &guess, &p, &SolveOptions::default()).unwrap();
        assert!(rec.wave.c > lo && rec.wave.c < hi);
        assert!(compatibility_m1(rec.wave.c, &p).abs() < 1e-11);
    }

    #[test]
    fn composite_seed_concatenates_groups() {
        let a = CoarseWave::new(2.0, vec![0.0, 0.1, 0.3]).unwrap();
        let b = CoarseWave::new(1.8, vec![0.0, 0.2]).unwrap();
        let c = CoarseWave::new(1.5, vec![0.0]).unwrap();
        let s = seed_composite(&[a.clone(), b, c], &[1.0, 2.0]).unwrap();
        assert_eq!(s.c, 2.0);
        let expect = [0.0, 0.1, 0.3, 1.3, 1.5, 3.5];
        for (x, e) in s.t.iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
        assert_eq!(seed_composite(&[a.clone()], &[]).unwrap(), a);
        assert!(seed_composite(&[a.clone(), a], &[-1.0]).is_err());
    }

    fn synthetic(c: f64, t: &[f64], n: usize, half_width: f64, covered: usize) -> NetworkTrajectory {
        use crate::difm::{FiringEvent, NetworkState};
        let h = 2.0 * half_width / n as f64;
        let mut events = Vec::new();
        for i in 0..covered {
            for (r, tj) in t.iter().enumerate() {
                events.push(FiringEvent { neuron: i, time: 10.0 + i as f64 * h / c + tj, ordinal: r + 1 });
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let state = NetworkState { t: 0.0, v: vec![], s: vec![] };
        NetworkTrajectory {
            n,
            half_width,
            horizon: 100.0,
            events,
            samples: vec![],
            levelset: vec![],
            speed_stats: None,
            final_state: state,
            warnings: vec![],
        }
    }

    #[test]
    fn seed_recovers_exact_firing_lines() {
        let traj = synthetic(3.0, &[0.0, 0.1], 200, 4.0, 60);
        let w = seed_from_simulation(&traj, 2).unwrap();
        assert!((w.c - 3.0).abs() < 1e-12, "{}", w.c);
        assert!((w.t[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn seed_needs_complete_bursts() {
        let traj = synthetic(3.0, &[0.0, 0.1], 200, 4.0, 1);
        assert!(matches!(seed_from_simulation(&traj, 2), Err(Error::InsufficientEvents(_))));
    }

    #[test]
    fn admissibility_cone() {
        assert!(admissible_unknowns(&[1.0]));
        assert!(admissible_unknowns(&[1.0, 0.1, 0.2]));
        assert!(!admissible_unknowns(&[0.0, 0.1]));
        assert!(!admissible_unknowns(&[1.0, -0.1]));
        assert!(!admissible_unknowns(&[1.0, 0.2, 0.2]));
    }
}
