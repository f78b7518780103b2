use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use spikewave::continuation::{
    continue_branch, gain_curve, grazing_residual_norm, solve_grazing, solve_hopf, ContinuationOptions, EventKind,
    GrazingPoint,
};
use spikewave::difm::{simulate, speed_stats, InitialCondition, LevelSample, SamplingOptions};
use spikewave::error::{Error, ErrorClass, Result, StageExt};
use spikewave::experiments::{run_experiment, scaling_checks, scaling_rows, ExperimentKind, ExperimentSpec, Scale};
use spikewave::families::{compact_wave, fast_tw1, grazing_chain};
use spikewave::io::{
    branch_table, events_table, levelset_table, num, profile_table, read_json, read_table, roots_table, scaling_table,
    snapshots_table, trajectory_positions, write_json, Table,
};
use spikewave::parallel::{set_threads, ExecutionMode};
use spikewave::params::{Config, ModelParams};
use spikewave::profile::sample_profile;
use spikewave::solver::{solve_wave, SolveOptions, WaveRecord};
use spikewave::stability::{build_matrices, classify, e_grid, ClassifyOptions, RootWindow};
use spikewave::verify::oracle_battery;
use spikewave::wave::CoarseWave;

#[derive(Parser)]
#[command(name = "spikewave", version, about = "Multi-spike travelling waves of integrate-and-fire networks")]
struct Cli {
    /// TOML configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for the data-parallel maps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Refuse pseudo-random inputs; experiments fall back to homogeneous initial data.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Event-driven simulation of the discrete network.
    Simulate(SimulateArgs),
    /// Solve the threshold conditions for an m-spike wave.
    SolveWave(SolveArgs),
    /// Roots of the stability determinant of a wave.
    Stability(StabilityArgs),
    /// Pseudo-arclength continuation of a wave in beta.
    ContinueBranch(BranchArgs),
    /// Locate the grazing point below a wave.
    Graze(GrazeArgs),
    /// Locate a Hopf point on a wave branch.
    Hopf(HopfArgs),
    /// Grazing points for consecutive m, seeded from one grazing point.
    GrazeScaling(ScalingArgs),
    /// Speed statistics of a level-set track.
    SpeedStats(SpeedArgs),
    /// Run the oracle battery.
    #[command(hide = true)]
    Verify,
    /// Run a figure-level experiment into a bundle.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InitKind {
    Uniform,
    Random,
    Wave,
    State,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    init: InitKind,
    /// Wave JSON for `--init wave`.
    #[arg(long)]
    wave: Option<PathBuf>,
    /// CSV with columns v, s for `--init state`.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    shift: f64,
    #[arg(long, default_value_t = 0.5)]
    v0: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.05)]
    interval: f64,
    /// Keep a snapshot every k samples; 0 keeps none.
    #[arg(long, default_value_t = 0)]
    snapshot_every: usize,
    #[arg(long, default_value_t = 0.0)]
    stats_from: f64,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    beta: Option<f64>,
    /// Wave JSON used as the Newton guess; without it a guess scan is run.
    #[arg(long)]
    guess: Option<PathBuf>,
    /// Also write profile samples on [-1, 2 cT_m + 1].
    #[arg(long)]
    profile: bool,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    wave: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    re_min: Option<f64>,
    #[arg(long)]
    re_max: Option<f64>,
    #[arg(long)]
    im_max: Option<f64>,
    /// Also dump E on the search grid.
    #[arg(long)]
    grid: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Up,
    Down,
}

#[derive(Args)]
struct BranchArgs {
    #[arg(long)]
    wave: PathBuf,
    #[arg(long, value_enum, default_value = "up")]
    direction: Direction,
    #[arg(long, default_value_t = 0.05)]
    beta_min: f64,
    #[arg(long, default_value_t = 25.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 400)]
    max_points: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Skip stability along the branch.
    #[arg(long)]
    no_stability: bool,
}

#[derive(Args)]
struct GrazeArgs {
    #[arg(long)]
    wave: PathBuf,
    /// Tangency offset; with it the grazing system is solved directly from the wave.
    #[arg(long)]
    t_g: Option<f64>,
}

#[derive(Args)]
struct HopfArgs {
    #[arg(long)]
    wave: PathBuf,
    /// Frequency guess; without it the branch is continued up until a Hopf event.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value_t = 25.0)]
    beta_max: f64,
}

#[derive(Args)]
struct ScalingArgs {
    /// Grazing point JSON, as written by `graze`.
    #[arg(long)]
    grazing: PathBuf,
    #[arg(long, default_value_t = 60)]
    m_max: usize,
}

#[derive(Args)]
struct SpeedArgs {
    /// Level-set CSV with columns t, z.
    #[arg(long)]
    levelset: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    from: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_parser = parse_kind)]
    kind: ExperimentKind,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Wave files: any JSON object with `c`, `t` and optionally `beta`.
#[derive(Deserialize)]
struct WaveInput {
    c: f64,
    t: Vec<f64>,
    beta: Option<f64>,
}

struct Ctx {
    config: Config,
    out: PathBuf,
    seedless: bool,
    mode: ExecutionMode,
}

impl Ctx {
    fn params(&self) -> ModelParams {
        self.config.params
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn wave(&self, path: &Path) -> Result<(CoarseWave, ModelParams)> {
        let w: WaveInput = read_json(path).stage(format!("reading {}", path.display()))?;
        let wave = CoarseWave::new(w.c, w.t)?;
        let p = self.params().with_beta(w.beta.unwrap_or(self.params().beta));
        Ok((wave, p))
    }

    fn classify_opts(&self) -> ClassifyOptions {
        ClassifyOptions { mode: self.mode, ..ClassifyOptions::from(self.config.numerics) }
    }
}

fn validation_failure(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let mut p = ctx.params();
    if let Some(b) = a.beta {
        p.beta = b;
    }
    let init = match a.init {
        InitKind::Uniform => InitialCondition::Uniform { v0: a.v0, s0: 0.0 },
        InitKind::Random => {
            if ctx.seedless {
                return Err(Error::Config("--seedless forbids random initial conditions".into()));
            }
            InitialCondition::Random { seed: a.seed, v_min: 0.0, v_max: 1.0, s0: 0.0 }
        }
        InitKind::Wave => {
            let path = a.wave.as_ref().ok_or_else(|| Error::Config("--init wave needs --wave".into()))?;
            let (wave, wp) = ctx.wave(path)?;
            p.beta = a.beta.unwrap_or(wp.beta);
            InitialCondition::Wave { wave, shift: a.shift }
        }
        InitKind::State => {
            let path = a.state.as_ref().ok_or_else(|| Error::Config("--init state needs --state".into()))?;
            let table = read_table(path)?;
            let col = |name: &str| -> Result<Vec<f64>> {
                let k = table
                    .header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Config(format!("{} has no column `{name}`", path.display())))?;
                table
                    .rows
                    .iter()
                    .map(|r| r[k].parse::<f64>().map_err(|e| Error::Config(format!("column {name}: {e}"))))
                    .collect()
            };
            InitialCondition::Explicit { v: col("v")?, s: col("s")? }
        }
    };
    let sampling = SamplingOptions {
        interval: a.interval,
        snapshot_every: a.snapshot_every,
        stats_from: a.stats_from,
        ..Default::default()
    };
    let traj = simulate(&init, &p, a.horizon, &sampling, ctx.mode)?;
    let positions = trajectory_positions(&traj);
    events_table(&traj.events, &positions).write(&ctx.path("events.csv"))?;
    levelset_table(&traj.levelset).write(&ctx.path("levelset.csv"))?;
    if !traj.samples.is_empty() {
        snapshots_table(&traj.samples, &positions).write(&ctx.path("snapshots.csv"))?;
    }
    write_json(&ctx.path("speed_stats.json"), &traj.speed_stats)?;
    for w in &traj.warnings {
        eprintln!("warning: {w}");
    }
    println!("{} events up to t = {}", traj.events.len(), traj.horizon);
    Ok(())
}

fn cmd_solve(ctx: &Ctx, a: &SolveArgs) -> Result<()> {
    let p = ctx.params().with_beta(a.beta.unwrap_or(ctx.params().beta));
    let numerics = ctx.config.numerics;
    let rec = match &a.guess {
        Some(path) => {
            let (guess, _) = ctx.wave(path)?;
            solve_wave(a.m, &guess, &p, &SolveOptions::from(numerics))?
        }
        None if a.m == 1 => fast_tw1(&p, &numerics)?,
        None => compact_wave(a.m, &p, &numerics, ctx.mode)?,
    };
    write_json(&ctx.path("wave.json"), &rec)?;
    if a.profile {
        let hi = 2.0 * rec.wave.width() + 1.0;
        profile_table(&sample_profile(&rec.wave, &p, -1.0, hi, 2001)).write(&ctx.path("profile.csv"))?;
    }
    println!("c = {}  T = {:?}  residual = {:.2e}  validated = {}", rec.wave.c, rec.wave.t, rec.residual, rec.validated);
    if rec.validated {
        Ok(())
    } else {
        Err(validation_failure("converged wave crosses threshold between spikes"))
    }
}

fn cmd_stability(ctx: &Ctx, a: &StabilityArgs) -> Result<()> {
    let (wave, p) = ctx.wave(&a.wave)?;
    let mut window = RootWindow::for_params(&p);
    window.re_min = a.re_min.unwrap_or(window.re_min);
    window.re_max = a.re_max.unwrap_or(window.re_max);
    window.im_max = a.im_max.unwrap_or(window.im_max);
    let opts = ClassifyOptions { window: Some(window), ..ctx.classify_opts() };
    let report = classify(&wave, &p, &opts)?;
    write_json(&ctx.path("stability.json"), &report)?;
    roots_table(&report).write(&ctx.path("roots.csv"))?;
    if a.grid {
        let mats = build_matrices(&wave, &p)?;
        let mut t = Table::new(&["re", "im", "ReE", "ImE"]);
        for (z, e) in e_grid(&mats, &window, &opts.grid, ctx.mode)? {
            t.push(vec![num(z.re), num(z.im), num(e.re), num(e.im)]);
        }
        t.write(&ctx.path("e_grid.csv"))?;
    }
    println!("{:?}, leading Re = {}", report.classification, report.leading_real_part());
    Ok(())
}

fn wave_record(wave: CoarseWave, p: &ModelParams, ctx: &Ctx) -> Result<WaveRecord> {
    solve_wave(wave.m(), &wave, p, &SolveOptions::from(ctx.config.numerics))
}

fn cmd_branch(ctx: &Ctx, a: &BranchArgs) -> Result<()> {
    let (wave, p) = ctx.wave(&a.wave)?;
    let start = wave_record(wave, &p, ctx)?;
    let opts = ContinuationOptions {
        step: a.step,
        direction: match a.direction {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        },
        max_points: a.max_points,
        beta_min: a.beta_min,
        beta_max: a.beta_max,
        detect_hopf: !a.no_stability,
        ..Default::default()
    };
    let branch = continue_branch(&start, &ctx.params(), &opts, &ctx.config.numerics, ctx.mode)?;
    branch_table(&branch).write(&ctx.path("branch.csv"))?;
    write_json(&ctx.path("events.json"), &json!({ "termination": branch.termination, "events": branch.events }))?;
    println!("{} points, {} events, ended by {:?}", branch.points.len(), branch.events.len(), branch.termination);
    Ok(())
}

fn write_grazing(ctx: &Ctx, g: &GrazingPoint) -> Result<()> {
    let residual = grazing_residual_norm(g, &ctx.params())?;
    write_json(&ctx.path("grazing.json"), g)?;
    println!("beta_G = {}  T_G = {}  residual = {residual:.2e}", g.beta_g, g.t_g);
    Ok(())
}

fn cmd_graze(ctx: &Ctx, a: &GrazeArgs) -> Result<()> {
    let (wave, p) = ctx.wave(&a.wave)?;
    let numerics = ctx.config.numerics;
    if let Some(t_g) = a.t_g {
        return write_grazing(ctx, &solve_grazing(&wave, t_g, p.beta, &ctx.params(), &numerics)?);
    }
    let start = wave_record(wave, &p, ctx)?;
    let opts = ContinuationOptions { direction: -1.0, detect_hopf: false, ..Default::default() };
    let branch = continue_branch(&start, &ctx.params(), &opts, &numerics, ctx.mode)?;
    let e = branch
        .events_of(EventKind::Grazing)
        .next()
        .ok_or_else(|| Error::Domain(format!("no grazing point; branch ended by {:?}", branch.termination)))?;
    let t_g = e.t_g.ok_or_else(|| Error::Domain("grazing event without tangency offset".into()))?;
    write_grazing(ctx, &solve_grazing(&e.wave, t_g, e.beta, &ctx.params(), &numerics)?)
}

fn cmd_hopf(ctx: &Ctx, a: &HopfArgs) -> Result<()> {
    let (wave, p) = ctx.wave(&a.wave)?;
    let numerics = ctx.config.numerics;
    let hp = match a.omega {
        Some(omega) => solve_hopf(&wave, p.beta, omega, &ctx.params(), &numerics)?,
        None => {
            let start = wave_record(wave, &p, ctx)?;
            let opts = ContinuationOptions { beta_max: a.beta_max, ..Default::default() };
            let branch = continue_branch(&start, &ctx.params(), &opts, &numerics, ctx.mode)?;
            let e = branch
                .events_of(EventKind::Hopf)
                .next()
                .ok_or_else(|| Error::Domain(format!("no Hopf point; branch ended by {:?}", branch.termination)))?;
            let omega = e.omega.ok_or(Error::ZeroFrequencyCollapse)?;
            solve_hopf(&e.wave, e.beta, omega, &ctx.params(), &numerics)?
        }
    };
    write_json(&ctx.path("hopf.json"), &hp)?;
    println!("beta_HB = {}  omega = {}  residual = {:.2e}", hp.beta_hb, hp.omega_hb, hp.residual);
    Ok(())
}

fn cmd_scaling(ctx: &Ctx, a: &ScalingArgs) -> Result<()> {
    let g: GrazingPoint = read_json(&a.grazing).stage(format!("reading {}", a.grazing.display()))?;
    let p = ctx.params();
    let chain = grazing_chain(&g, a.m_max, &p, &ctx.config.numerics);
    scaling_table(&scaling_rows(&chain)).write(&ctx.path("scaling.csv"))?;
    let last = chain.last().expect("chain holds its first point");
    let mut gain = Table::new(&["x", "rate"]);
    for (x, r) in gain_curve(&last.wave) {
        gain.push(vec![num(x), num(r)]);
    }
    gain.write(&ctx.path("gain.csv"))?;
    let checks = scaling_checks(&chain, &p, 10)?;
    write_json(&ctx.path("scaling.json"), &json!({ "reached": last.wave.m(), "checks": checks }))?;
    println!("reached m = {}; slopes: c {:.3}, T_m {:.3}", last.wave.m(), checks.slope_c, checks.slope_t_m);
    Ok(())
}

fn cmd_speed(ctx: &Ctx, a: &SpeedArgs) -> Result<()> {
    let table = read_table(&a.levelset)?;
    let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", a.levelset.display())));
    let mut track = Vec::with_capacity(table.rows.len());
    for r in &table.rows {
        let z = if r.get(1).map_or(true, |z| z.is_empty()) { None } else { Some(parse(&r[1])?) };
        track.push(LevelSample { t: parse(&r[0])?, z });
    }
    let stats = speed_stats(&track, a.from)
        .ok_or_else(|| Error::InsufficientEvents("fewer than three crossed samples".into()))?;
    write_json(&ctx.path("speed_stats.json"), &stats)?;
    println!("c_bar = {}  sigma = {}  range [{}, {}]", stats.c_bar, stats.sigma_c, stats.c_min, stats.c_max);
    Ok(())
}

fn cmd_verify(ctx: &Ctx) -> Result<()> {
    let checks = oracle_battery(ctx.mode)?;
    for c in &checks {
        println!("{} {:<36} {:.3e} in [{:.1e}, {:.1e}]", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.lower, c.upper);
    }
    write_json(&ctx.path("verify.json"), &checks)?;
    match checks.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        k => Err(validation_failure(format!("{k} oracle checks failed"))),
    }
}

fn cmd_experiment(ctx: &Ctx, a: &ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec {
        kind: a.kind,
        overrides: ctx.config,
        scale: Scale { m_max: a.m_max, n: a.n, horizon: a.horizon },
        seedless: ctx.seedless,
        mode: ctx.mode,
    };
    let manifest = run_experiment(&spec, &ctx.out)?;
    println!("{}: {} files in {}", manifest.experiment, manifest.files.len(), ctx.out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        None => Config::default(),
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        set_threads(k);
    }
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx { config, out: cli.out.clone(), seedless: cli.seedless, mode: ExecutionMode::default() };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::SolveWave(a) => cmd_solve(&ctx, a),
        Command::Stability(a) => cmd_stability(&ctx, a),
        Command::ContinueBranch(a) => cmd_branch(&ctx, a),
        Command::Graze(a) => cmd_graze(&ctx, a),
        Command::Hopf(a) => cmd_hopf(&ctx, a),
        Command::GrazeScaling(a) => cmd_scaling(&ctx, a),
        Command::SpeedStats(a) => cmd_speed(&ctx, a),
        Command::Verify => cmd_verify(&ctx),
        Command::Experiment(a) => cmd_experiment(&ctx, a),
    }
}

fn main() -> ExitCode {
    // Usage errors share the configuration exit status.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Numerical => 2,
                ErrorClass::Validation => 3,
                ErrorClass::Config => 4,
            })
        }
    }
}
