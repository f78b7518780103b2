//! Figure-level experiments. Each one writes a bundle: `config.toml`,
//! `experiment.json`, CSV tables, `summary.json` and `manifest.json`.
//!
//! Every experiment prescribes the parameters its figure depends on (network
//! size, ring, stimulus, β values) and takes everything else from the supplied
//! configuration. Outputs depend only on the inputs, never on timing or thread
//! count, so reruns produce byte-identical CSVs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::continuation::{
    continue_branch, gain_curve, grazing_residual_norm, solve_grazing, solve_hopf, Branch, ContinuationOptions,
    EventKind, GrazingPoint, ScalingRow,
};
use crate::difm::{
    count_fronts, simulate, superposed_waves, InitialCondition, Network, NetworkTrajectory, SamplingOptions,
};
use crate::error::{Error, Result, StageExt};
use crate::families::{
    compact_wave, fast_tw1, grazing_chain, nested_family, tw3_grazing, wave_above_grazing, wave_on_branch,
    SCAN_SPACINGS, SCAN_SPEEDS,
};
use crate::io::{
    branch_table, events_table, levelset_table, num, profile_table, roots_table, scaling_table, snapshots_table,
    trajectory_positions, Bundle, Manifest, Table,
};
use crate::difm::loglog_slope;
use crate::params::{Config, ModelParams, Numerics, Stimulus};
use crate::parallel::ExecutionMode;
use crate::profile::sample_profile;
use crate::solver::{scan_guesses, seed_composite, solve_wave, SolveOptions, WaveRecord};
use crate::stability::{classify, ClassifyOptions, StabilityReport};
use crate::wave::CoarseWave;

/// Desk-scale limits on [`Scale`].
pub const MAX_M: usize = 120;
pub const MAX_N: usize = 4000;
pub const MAX_HORIZON: f64 = 1000.0;

/// Seed of the random initial conditions.
pub const RANDOM_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "fig2-bump")]
    Fig2Bump,
    #[serde(rename = "fig3-waves")]
    Fig3Waves,
    #[serde(rename = "fig4-profiles")]
    Fig4Profiles,
    #[serde(rename = "fig5-tw3-branch")]
    Fig5Tw3Branch,
    #[serde(rename = "fig6-nested")]
    Fig6Nested,
    #[serde(rename = "fig7-grazing")]
    Fig7Grazing,
    #[serde(rename = "fig8-bump-stats")]
    Fig8BumpStats,
    #[serde(rename = "fig9-composite")]
    Fig9Composite,
    #[serde(rename = "figS1-excitatory")]
    FigS1Excitatory,
}

impl ExperimentKind {
    pub const ALL: [Self; 9] = [
        Self::Fig2Bump,
        Self::Fig3Waves,
        Self::Fig4Profiles,
        Self::Fig5Tw3Branch,
        Self::Fig6Nested,
        Self::Fig7Grazing,
        Self::Fig8BumpStats,
        Self::Fig9Composite,
        Self::FigS1Excitatory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig2Bump => "fig2-bump",
            Self::Fig3Waves => "fig3-waves",
            Self::Fig4Profiles => "fig4-profiles",
            Self::Fig5Tw3Branch => "fig5-tw3-branch",
            Self::Fig6Nested => "fig6-nested",
            Self::Fig7Grazing => "fig7-grazing",
            Self::Fig8BumpStats => "fig8-bump-stats",
            Self::Fig9Composite => "fig9-composite",
            Self::FigS1Excitatory => "figS1-excitatory",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown experiment `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

/// Size overrides; `None` keeps the experiment's default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub m_max: Option<usize>,
    pub n: Option<usize>,
    pub horizon: Option<f64>,
}

impl Scale {
    pub fn check(&self) -> Result<()> {
        if let Some(m) = self.m_max {
            if !(3..=MAX_M).contains(&m) {
                return Err(Error::Config(format!("m_max = {m} outside [3, {MAX_M}]")));
            }
        }
        if let Some(n) = self.n {
            if !(10..=MAX_N).contains(&n) {
                return Err(Error::Config(format!("n = {n} outside [10, {MAX_N}]")));
            }
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h <= MAX_HORIZON) {
                return Err(Error::Config(format!("horizon = {h} outside (0, {MAX_HORIZON}]")));
            }
        }
        Ok(())
    }

    fn m_max(&self, default: usize) -> usize {
        self.m_max.unwrap_or(default)
    }

    fn n(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    fn horizon(&self, default: f64) -> f64 {
        self.horizon.unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Configuration the experiment's own settings are layered onto.
    pub overrides: Config,
    pub scale: Scale,
    /// Replace random initial conditions by `v = 0.5, s = 0`.
    pub seedless: bool,
    pub mode: ExecutionMode,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self { kind, overrides: Config::default(), scale: Scale::default(), seedless: false, mode: ExecutionMode::default() }
    }

    fn params(&self) -> ModelParams {
        self.overrides.params
    }

    fn numerics(&self) -> Numerics {
        self.overrides.numerics
    }
}

#[derive(Debug, Serialize)]
struct ExperimentRecord<'a> {
    experiment: &'a str,
    scale: Scale,
    seedless: bool,
}

/// Runs an experiment into `out` and returns the written manifest.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<Manifest> {
    spec.scale.check()?;
    spec.overrides.params.validate().map_err(|e| Error::Config(e.to_string()))?;
    let mut bundle = Bundle::create(out)?;
    bundle.config(&spec.overrides)?;
    bundle.json("experiment.json", &ExperimentRecord { experiment: spec.kind.name(), scale: spec.scale, seedless: spec.seedless })?;
    let summary = run_driver(spec, &mut bundle).stage(spec.kind.name())?;
    bundle.json("summary.json", &summary)?;
    bundle.finish(spec.kind.name())
}

fn run_driver(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    match spec.kind {
        ExperimentKind::Fig2Bump => fig2_bump(spec, bundle),
        ExperimentKind::Fig3Waves => fig3_waves(spec, bundle),
        ExperimentKind::Fig4Profiles => fig4_profiles(spec, bundle),
        ExperimentKind::Fig5Tw3Branch => fig5_tw3_branch(spec, bundle),
        ExperimentKind::Fig6Nested => fig6_nested(spec, bundle),
        ExperimentKind::Fig7Grazing => fig7_grazing(spec, bundle),
        ExperimentKind::Fig8BumpStats => fig8_bump_stats(spec, bundle),
        ExperimentKind::Fig9Composite => fig9_composite(spec, bundle),
        ExperimentKind::FigS1Excitatory => figs1_excitatory(spec, bundle),
    }
}

fn label(x: f64) -> String {
    format!("{x}")
}

fn network_params(base: &ModelParams, beta: f64, half_width: f64, n: usize, stimulus: Stimulus) -> ModelParams {
    let mut p = base.with_beta(beta);
    p.domain.half_width = half_width;
    p.domain.n = n;
    p.stimulus = stimulus;
    p
}

fn quiet(base: &ModelParams) -> Stimulus {
    Stimulus { d1: 0.0, ..base.stimulus }
}

fn random_or_uniform(seedless: bool) -> InitialCondition {
    if seedless {
        InitialCondition::Uniform { v0: 0.5, s0: 0.0 }
    } else {
        InitialCondition::Random { seed: RANDOM_SEED, v_min: 0.0, v_max: 1.0, s0: 0.0 }
    }
}

/// Writes events and level-set tables of one run, plus snapshots if any.
fn write_run(bundle: &mut Bundle, prefix: &str, traj: &NetworkTrajectory) -> Result<()> {
    let positions = trajectory_positions(traj);
    bundle.table(&format!("{prefix}_events.csv"), &events_table(&traj.events, &positions))?;
    bundle.table(&format!("{prefix}_levelset.csv"), &levelset_table(&traj.levelset))?;
    if !traj.samples.is_empty() {
        bundle.table(&format!("{prefix}_snapshots.csv"), &snapshots_table(&traj.samples, &positions))?;
    }
    Ok(())
}

fn run_summary(traj: &NetworkTrajectory, window: f64, burst_gap: f64) -> Value {
    let t_to = traj.horizon;
    let fronts = count_fronts(traj, (t_to - window).max(0.0), t_to, burst_gap);
    json!({
        "events": traj.events.len(),
        "fronts": fronts.fronts,
        "bursts": fronts.bursts,
        "speed": traj.speed_stats.as_ref().map(|s| json!({
            "c_bar": s.c_bar, "sigma_c": s.sigma_c, "c_min": s.c_min, "c_max": s.c_max,
        })),
        "warnings": traj.warnings,
    })
}

fn wave_json(rec: &WaveRecord) -> Value {
    json!({
        "m": rec.wave.m(),
        "beta": rec.beta,
        "c": rec.wave.c,
        "T": rec.wave.t,
        "width": rec.wave.width(),
        "residual": rec.residual,
        "validated": rec.validated,
    })
}

fn classify_with(wave: &CoarseWave, p: &ModelParams, spec: &ExperimentSpec) -> Result<StabilityReport> {
    classify(wave, p, &ClassifyOptions { mode: spec.mode, ..ClassifyOptions::from(spec.numerics()) })
}

fn fig2_bump(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let base = spec.params();
    let n = spec.scale.n(80);
    let horizon = spec.scale.horizon(100.0);
    let stimulus = Stimulus { d1: 2.0, d2: 10.0, ..base.stimulus };
    let sampling = SamplingOptions { interval: 0.05, snapshot_every: 10, stats_from: 20.0, ..Default::default() };
    let init = random_or_uniform(spec.seedless);
    let mut runs = Vec::new();
    for beta in [1.0, 3.5] {
        let p = network_params(&base, beta, 1.0, n, stimulus);
        let traj = simulate(&init, &p, horizon, &sampling, spec.mode)?;
        write_run(bundle, &format!("fig2_beta{}", label(beta)), &traj)?;
        runs.push(json!({ "beta": beta, "run": run_summary(&traj, 20.0, 1.0) }));
    }
    Ok(json!({ "n": n, "L": 1.0, "horizon": horizon, "initial": init_name(&init), "runs": runs }))
}

fn init_name(init: &InitialCondition) -> &'static str {
    if init.is_random() {
        "random"
    } else {
        "uniform"
    }
}

fn fig3_waves(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let base = spec.params();
    let n = spec.scale.n(80);
    let horizon = spec.scale.horizon(100.0);
    let sampling = SamplingOptions { interval: 0.05, snapshot_every: 10, stats_from: 20.0, ..Default::default() };
    let init = random_or_uniform(spec.seedless);
    let mut runs = Vec::new();
    for (d1, d2) in [(0.4, 12.0), (2.0, 10.0)] {
        let p = network_params(&base, 4.5, 1.0, n, Stimulus { d1, d2, ..base.stimulus });
        let traj = simulate(&init, &p, horizon, &sampling, spec.mode)?;
        write_run(bundle, &format!("fig3_d{}_{}", label(d1), label(d2)), &traj)?;
        runs.push(json!({ "d1": d1, "d2": d2, "run": run_summary(&traj, 50.0, 1.0) }));
    }
    Ok(json!({ "n": n, "L": 1.0, "beta": 4.5, "horizon": horizon, "initial": init_name(&init), "runs": runs }))
}

fn fig4_profiles(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let p = spec.params();
    let numerics = spec.numerics();
    let (_, g3) = tw3_grazing(&p, &numerics, spec.mode).stage("TW_3 grazing point")?;
    let chain = grazing_chain(&g3, 20, &p, &numerics);
    let pick = |m: usize| {
        chain.get(m - 3).ok_or_else(|| Error::Domain(format!("grazing chain stopped before m = {m}")))
    };
    let mut waves = Vec::new();
    for (m, beta, lo, hi) in [(5, 4.5, -0.5, 1.0), (20, 7.7, -1.5, 2.0)] {
        let rec = wave_above_grazing(pick(m)?, beta, &p, &numerics, spec.mode).stage(format!("TW_{m} at beta = {beta}"))?;
        let samples = sample_profile(&rec.wave, &p.with_beta(beta), lo, hi, 1501);
        bundle.table(&format!("fig4_tw{m}_profile.csv"), &profile_table(&samples))?;
        waves.push(wave_json(&rec));
    }
    Ok(json!({ "waves": waves }))
}

fn fig5_tw3_branch(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let p = spec.params();
    let numerics = spec.numerics();
    let start = crate::families::tw3_reference(&p, &numerics, spec.mode).stage("TW_3 at beta = 10")?;
    let down_opts = ContinuationOptions { direction: -1.0, detect_hopf: true, ..Default::default() };
    let up_opts = ContinuationOptions { direction: 1.0, detect_hopf: true, ..Default::default() };
    let down = continue_branch(&start, &p, &down_opts, &numerics, spec.mode).stage("downward continuation")?;
    let up = continue_branch(&start, &p, &up_opts, &numerics, spec.mode).stage("upward continuation")?;
    bundle.table("fig5_branch_down.csv", &branch_table(&down))?;
    bundle.table("fig5_branch_up.csv", &branch_table(&up))?;

    let mut events = Vec::new();
    let mut grazing: Option<GrazingPoint> = None;
    for e in down.events.iter().chain(&up.events) {
        let refined = match e.kind {
            EventKind::Grazing => e.t_g.and_then(|t_g| solve_grazing(&e.wave, t_g, e.beta, &p, &numerics).ok()).map(|g| {
                let residual = grazing_residual_norm(&g, &p).unwrap_or(f64::NAN);
                let v = json!({ "kind": "grazing", "beta": g.beta_g, "c": g.wave.c, "T": g.wave.t, "T_G": g.t_g, "residual": residual });
                grazing.get_or_insert(g);
                v
            }),
            EventKind::Hopf => e.omega.and_then(|w| solve_hopf(&e.wave, e.beta, w, &p, &numerics).ok()).map(|h| {
                json!({ "kind": "hopf", "beta": h.beta_hb, "c": h.wave.c, "T": h.wave.t, "omega": h.omega_hb, "residual": h.residual })
            }),
            EventKind::Fold => Some(json!({ "kind": "fold", "beta": e.beta, "c": e.wave.c, "T": e.wave.t })),
        };
        events.push(refined.unwrap_or_else(|| json!({ "kind": e.kind, "beta": e.beta, "refined": false })));
    }

    let rec16 = wave_on_branch(&up, 16.0, &p, &numerics).stage("TW_3 at beta = 16")?;
    let mut roots = Vec::new();
    for rec in [&start, &rec16] {
        let rep = classify_with(&rec.wave, &p.with_beta(rec.beta), spec)?;
        bundle.table(&format!("fig5_roots_beta{}.csv", label(rec.beta)), &roots_table(&rep))?;
        roots.push(json!({
            "beta": rec.beta,
            "classification": rep.classification,
            "leading": rep.leading.as_ref().map(|r| [r.lambda.re, r.lambda.im]),
        }));
    }

    let g = grazing.ok_or_else(|| Error::Domain("TW_3 branch has no grazing point".into()))?;
    let pg = p.with_beta(g.beta_g);
    let samples = sample_profile(&g.wave, &pg, -1.0, g.wave.c * g.t_g + 2.0, 1501);
    bundle.table("fig5_grazing_profile.csv", &profile_table(&samples))?;

    let n = spec.scale.n(500);
    let horizon = spec.scale.horizon(60.0);
    let sampling = SamplingOptions { interval: 0.05, stats_from: 20.0, ..Default::default() };
    let mut runs = Vec::new();
    for (beta, wave) in [(g.beta_g, &g.wave), (start.beta, &start.wave), (rec16.beta, &rec16.wave)] {
        let q = network_params(&p, beta, 3.0, n, quiet(&p));
        let init = InitialCondition::Wave { wave: wave.clone(), shift: 0.0 };
        let traj = simulate(&init, &q, horizon, &sampling, spec.mode).stage(format!("simulation at beta = {beta}"))?;
        write_run(bundle, &format!("fig5_difm_beta{}", label(beta)), &traj)?;
        runs.push(json!({ "beta": beta, "run": run_summary(&traj, 20.0, 1.0) }));
    }
    Ok(json!({
        "start": wave_json(&start),
        "down_termination": down.termination,
        "up_termination": up.termination,
        "events": events,
        "roots": roots,
        "difm": { "n": n, "L": 3.0, "horizon": horizon, "runs": runs },
    }))
}

/// Common β of the nested-speed comparison.
pub const NESTED_BETA: f64 = 8.0;

fn fig6_nested(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let p = spec.params();
    let numerics = spec.numerics();
    let m_max = spec.scale.m_max(6);
    let family = nested_family(NESTED_BETA, m_max, &p, &numerics, spec.mode).stage("nested family")?;
    let mut speeds = Table::new(&["m", "c", "width", "leading_re"]);
    let mut summary = Vec::new();
    for rec in &family.waves {
        let m = rec.wave.m();
        let rep = classify_with(&rec.wave, &p.with_beta(rec.beta), spec)?;
        speeds.push(vec![m.to_string(), num(rec.wave.c), num(rec.wave.width()), num(rep.leading_real_part())]);
        summary.push(json!({ "m": m, "c": rec.wave.c, "classification": rep.classification }));
        for (dir, name) in [(-1.0, "down"), (1.0, "up")] {
            let opts = ContinuationOptions { direction: dir, max_points: 250, stability_every: Some(5), ..Default::default() };
            let branch = continue_branch(rec, &p, &opts, &numerics, spec.mode).stage(format!("TW_{m} continuation {name}"))?;
            bundle.table(&format!("fig6_branch_m{m}_{name}.csv"), &branch_table(&branch))?;
        }
    }
    bundle.table("fig6_speeds.csv", &speeds)?;
    let cs: Vec<f64> = family.waves.iter().map(|r| r.wave.c).collect();
    Ok(json!({
        "beta": NESTED_BETA,
        "waves": summary,
        "strictly_decreasing": cs.windows(2).all(|w| w[0] > w[1]),
    }))
}

/// Trend checks on a grazing chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingChecks {
    pub c_decreasing: bool,
    pub t_m_increasing: bool,
    /// `|c T_m - c T_{m-1}|` shrinks over the last `tail` values of `m`.
    pub width_steps_decreasing: bool,
    pub gain_unimodal: bool,
    pub slope_c: f64,
    pub slope_t_m: f64,
    pub slope_width: f64,
    pub max_residual: f64,
}

pub fn scaling_rows(chain: &[GrazingPoint]) -> Vec<ScalingRow> {
    chain
        .iter()
        .map(|g| {
            let t_m = g.wave.t[g.wave.m() - 1];
            ScalingRow { m: g.wave.m(), beta_g: g.beta_g, c: g.wave.c, t_m, width: g.wave.c * t_m, t_g: g.t_g }
        })
        .collect()
}

/// Rises (weakly) to one peak, then falls (weakly).
pub fn is_unimodal(values: &[f64]) -> bool {
    let peak = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(k, _)| k);
    values[..=peak.min(values.len().saturating_sub(1))].windows(2).all(|w| w[1] >= w[0])
        && values[peak..].windows(2).all(|w| w[1] <= w[0])
}

pub fn scaling_checks(chain: &[GrazingPoint], p: &ModelParams, tail: usize) -> Result<ScalingChecks> {
    let rows = scaling_rows(chain);
    let last = chain.last().ok_or_else(|| Error::Domain("empty grazing chain".into()))?;
    let steps: Vec<f64> = rows.windows(2).map(|w| (w[1].width - w[0].width).abs()).collect();
    let tail_steps = &steps[steps.len().saturating_sub(tail)..];
    let rates: Vec<f64> = gain_curve(&last.wave).into_iter().map(|(_, r)| r).collect();
    let fit = |f: &dyn Fn(&ScalingRow) -> f64| -> Result<f64> {
        Ok(loglog_slope(&rows.iter().map(|r| (r.m as f64, f(r))).collect::<Vec<_>>())?.0)
    };
    let mut max_residual: f64 = 0.0;
    for g in chain {
        max_residual = max_residual.max(grazing_residual_norm(g, p)?);
    }
    Ok(ScalingChecks {
        c_decreasing: rows.windows(2).all(|w| w[1].c < w[0].c),
        t_m_increasing: rows.windows(2).all(|w| w[1].t_m > w[0].t_m),
        width_steps_decreasing: tail_steps.windows(2).all(|w| w[1] < w[0]),
        gain_unimodal: is_unimodal(&rates),
        slope_c: fit(&|r| r.c)?,
        slope_t_m: fit(&|r| r.t_m)?,
        slope_width: fit(&|r| r.width)?,
        max_residual,
    })
}

fn fig7_grazing(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let p = spec.params();
    let numerics = spec.numerics();
    let m_max = spec.scale.m_max(60);
    let (_, g3) = tw3_grazing(&p, &numerics, spec.mode).stage("TW_3 grazing point")?;
    let chain = grazing_chain(&g3, m_max, &p, &numerics);
    let last = chain.last().expect("chain holds its first point");
    bundle.table("fig7_scaling.csv", &scaling_table(&scaling_rows(&chain)))?;
    let mut gain = Table::new(&["x", "rate"]);
    for (x, r) in gain_curve(&last.wave) {
        gain.push(vec![num(x), num(r)]);
    }
    bundle.table(&format!("fig7_gain_m{}.csv", last.wave.m()), &gain)?;
    let checks = scaling_checks(&chain, &p, 10)?;
    Ok(json!({
        "m_max": m_max,
        "reached": last.wave.m(),
        "checks": checks,
    }))
}

/// β values of the bump statistics.
pub const BUMP_BETAS: [f64; 3] = [2.75, 3.0, 3.25];
/// Spikes of the unstable wave that seeds the bumps.
pub const BUMP_SEED_M: usize = 40;

/// Sampling of the bump runs: coarse samples and a long averaging window.
pub fn bump_sampling() -> SamplingOptions {
    SamplingOptions { interval: 0.5, stats_from: 20.0, ..Default::default() }
}

/// `TW_40` at each β of [`BUMP_BETAS`].
pub fn bump_seeds(p: &ModelParams, numerics: &Numerics, mode: ExecutionMode) -> Result<Vec<WaveRecord>> {
    let (_, g3) = tw3_grazing(p, numerics, mode)?;
    let chain = grazing_chain(&g3, BUMP_SEED_M, p, numerics);
    let g = chain
        .last()
        .filter(|g| g.wave.m() == BUMP_SEED_M)
        .ok_or_else(|| Error::Domain(format!("grazing chain stopped before m = {BUMP_SEED_M}")))?;
    BUMP_BETAS.iter().map(|&b| wave_above_grazing(g, b, p, numerics, mode)).collect()
}

fn fig8_bump_stats(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let p = spec.params();
    let numerics = spec.numerics();
    let n = spec.scale.n(1000);
    let horizon = spec.scale.horizon(200.0);
    let seeds = bump_seeds(&p, &numerics, spec.mode).stage("bump seeds")?;
    let mut stats = Table::new(&["beta", "c_wave", "leading_re", "c_bar", "sigma_c", "c_min", "c_max"]);
    let mut widths = Vec::new();
    let mut runs = Vec::new();
    for rec in &seeds {
        let rep = classify_with(&rec.wave, &p.with_beta(rec.beta), spec)?;
        let q = network_params(&p, rec.beta, p.domain.half_width, n, quiet(&p));
        let init = InitialCondition::Wave { wave: rec.wave.clone(), shift: 0.0 };
        let traj = simulate(&init, &q, horizon, &bump_sampling(), spec.mode).stage(format!("simulation at beta = {}", rec.beta))?;
        bundle.table(&format!("fig8_levelset_beta{}.csv", label(rec.beta)), &levelset_table(&traj.levelset))?;
        let s = traj
            .speed_stats
            .as_ref()
            .ok_or_else(|| Error::InsufficientEvents(format!("no level-set track at β = {}", rec.beta)))?;
        stats.push(vec![
            num(rec.beta),
            num(rec.wave.c),
            num(rep.leading_real_part()),
            num(s.c_bar),
            num(s.sigma_c),
            num(s.c_min),
            num(s.c_max),
        ]);
        widths.push(s.c_max - s.c_min);
        runs.push(json!({ "beta": rec.beta, "c_bar": s.c_bar, "width": s.c_max - s.c_min, "seed_classification": rep.classification }));
    }
    bundle.table("fig8_stats.csv", &stats)?;
    Ok(json!({
        "n": n,
        "horizon": horizon,
        "runs": runs,
        "width_increasing": widths.windows(2).all(|w| w[1] > w[0]),
    }))
}

fn fig9_composite(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let p = spec.params();
    let numerics = spec.numerics();
    let beta = crate::families::TW3_BETA;
    let pb = p.with_beta(beta);
    let tw1 = fast_tw1(&pb, &numerics)?;
    let tw2 = compact_wave(2, &pb, &numerics, spec.mode)?;
    let tw3 = compact_wave(3, &pb, &numerics, spec.mode)?;

    // Composite solutions: TW_3 at the front, another group trailing.
    let opts = SolveOptions::from(numerics);
    let mut table = Table::new(&["pattern", "gap", "c", "width", "validated", "leading_re"]);
    let mut composites = Vec::new();
    for (pattern, tail) in [("3+1", &tw1), ("3+2", &tw2), ("3+3", &tw3)] {
        for gap in [0.5, 1.0, 2.0, 4.0] {
            let guess = seed_composite(&[tw3.wave.clone(), tail.wave.clone()], &[gap])?;
            let Ok(rec) = solve_wave(guess.m(), &guess, &pb, &opts) else { continue };
            let lead = if rec.validated {
                classify_with(&rec.wave, &pb, spec)?.leading_real_part()
            } else {
                f64::NAN
            };
            table.push(vec![
                pattern.to_string(),
                num(gap),
                num(rec.wave.c),
                num(rec.wave.width()),
                rec.validated.to_string(),
                num(lead),
            ]);
            if rec.validated {
                composites.push(json!({ "pattern": pattern, "gap": gap, "c": rec.wave.c, "leading_re": lead }));
            }
        }
    }
    bundle.table("fig9_composites.csv", &table)?;

    // Separated waves on one ring, fastest at the back.
    let n = spec.scale.n(1000);
    let horizon = spec.scale.horizon(60.0);
    let q = network_params(&p, beta, 5.0, n, quiet(&p));
    let net = Network::new(&q, spec.mode)?;
    let groups = [(tw1.wave.clone(), -2.5), (tw2.wave.clone(), 0.0), (tw3.wave.clone(), 2.5)];
    let init = superposed_waves(&groups, &net)?;
    let sampling = SamplingOptions { interval: 0.05, stats_from: 20.0, ..Default::default() };
    let traj = simulate(&init, &q, horizon, &sampling, spec.mode).stage("composite simulation")?;
    write_run(bundle, "fig9_difm", &traj)?;
    Ok(json!({
        "beta": beta,
        "speeds": { "tw1": tw1.wave.c, "tw2": tw2.wave.c, "tw3": tw3.wave.c },
        "composites": composites,
        "difm": { "n": n, "L": 5.0, "horizon": horizon, "run": run_summary(&traj, 20.0, 1.0) },
    }))
}

/// Excitatory-only kernel of the supplementary figure.
pub fn excitatory_params(base: &ModelParams) -> ModelParams {
    ModelParams { a1: 2.0, b1: 5.0, a2: 0.0, drive: 0.82, ..*base }
}

/// Widest wave kept when picking excitatory starting points.
const EXCITATORY_MAX_WIDTH: f64 = 4.0;

fn excitatory_start(m: usize, p: &ModelParams, numerics: &Numerics, mode: ExecutionMode) -> Result<WaveRecord> {
    if m == 1 {
        return fast_tw1(&p.with_beta(8.0), numerics);
    }
    scan_guesses(m, &p.with_beta(4.0), &SCAN_SPEEDS, &SCAN_SPACINGS, &SolveOptions::from(*numerics), mode)
        .into_iter()
        .find(|r| r.wave.width() < EXCITATORY_MAX_WIDTH)
        .ok_or_else(|| Error::NoConvergence { iterations: 0, residual: f64::NAN })
}

/// Natural continuation in `I` with Newton at each step, in both directions;
/// returns `(I, wave)` in increasing `I`.
fn drive_sweep(start: &WaveRecord, p: &ModelParams, numerics: &Numerics, step: f64, bounds: (f64, f64)) -> Vec<(f64, WaveRecord)> {
    let opts = SolveOptions::from(*numerics);
    let mut out = vec![(p.drive, start.clone())];
    for dir in [-1.0, 1.0] {
        let mut cur = start.wave.clone();
        let mut side = Vec::new();
        for k in 1.. {
            let drive = p.drive + dir * step * k as f64;
            if drive < bounds.0 || drive > bounds.1 {
                break;
            }
            let q = ModelParams { drive, ..p.with_beta(start.beta) };
            match solve_wave(cur.m(), &cur, &q, &opts) {
                Ok(rec) if rec.validated => {
                    cur = rec.wave.clone();
                    side.push((drive, rec));
                }
                _ => break,
            }
        }
        if dir < 0.0 {
            side.reverse();
            out.splice(0..0, side);
        } else {
            out.extend(side);
        }
    }
    out
}

fn figs1_excitatory(spec: &ExperimentSpec, bundle: &mut Bundle) -> Result<Value> {
    let p = excitatory_params(&spec.params());
    p.validate().map_err(|e| Error::Config(e.to_string()))?;
    let numerics = spec.numerics();
    let m_max = spec.scale.m_max(16);
    let ms: Vec<usize> = [1, 2, 4, 8, 16].into_iter().filter(|&m| m <= m_max).collect();
    let mut out = Vec::new();
    for &m in &ms {
        let start = excitatory_start(m, &p, &numerics, spec.mode).stage(format!("excitatory TW_{m}"))?;
        let mut branch_events = Vec::new();
        for (dir, name) in [(-1.0, "down"), (1.0, "up")] {
            let opts = ContinuationOptions {
                direction: dir,
                max_points: 300,
                beta_min: 0.2,
                beta_max: 20.0,
                detect_hopf: false,
                ..Default::default()
            };
            let branch: Branch =
                continue_branch(&start, &p, &opts, &numerics, spec.mode).stage(format!("TW_{m} continuation {name}"))?;
            bundle.table(&format!("figS1_branch_m{m}_{name}.csv"), &branch_table(&branch))?;
            branch_events.extend(
                branch.events.iter().map(|e| json!({ "kind": e.kind, "beta": e.beta, "c": e.wave.c, "direction": name })),
            );
        }
        let sweep = drive_sweep(&start, &p, &numerics, 0.005, (0.5, 0.995));
        let mut table = Table::new(&["I", "c", "width"]);
        for (drive, rec) in &sweep {
            table.push(vec![num(*drive), num(rec.wave.c), num(rec.wave.width())]);
        }
        bundle.table(&format!("figS1_drive_m{m}.csv"), &table)?;
        out.push(json!({
            "m": m,
            "start": wave_json(&start),
            "events": branch_events,
            "drive_range": [sweep[0].0, sweep[sweep.len() - 1].0],
        }));
    }
    Ok(json!({ "a1": p.a1, "b1": p.b1, "a2": p.a2, "I": p.drive, "waves": out }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("fig10".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn scale_caps_are_enforced() {
        assert!(Scale { n: Some(MAX_N + 1), ..Default::default() }.check().is_err());
        assert!(Scale { m_max: Some(2), ..Default::default() }.check().is_err());
        assert!(Scale { horizon: Some(-1.0), ..Default::default() }.check().is_err());
        assert!(Scale { m_max: Some(60), n: Some(1000), horizon: Some(200.0) }.check().is_ok());
    }

    #[test]
    fn unimodality() {
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 2.0, 1.0]));
        assert!(is_unimodal(&[3.0, 2.0]));
        assert!(!is_unimodal(&[1.0, 3.0, 2.0, 4.0]));
    }
}
