//! Continuation of travelling-wave branches in β, with grazing, Hopf and fold
//! detection, and the extended systems that locate those points exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::newton::{damped_newton, fd_jacobian, max_norm, NewtonOptions};
use crate::params::{ModelParams, Numerics};
use crate::parallel::ExecutionMode;
use crate::profile::{profile_nu, profile_slope};
use crate::solver::{
    admissible_unknowns, secondary_maximum, threshold_residuals, trailing_maximum, validate,
    SecondaryMax, SolveOptions, WaveRecord,
};
use crate::stability::{build_matrices, classify_seeded, evaluate_e, ClassifyOptions, StabilityReport, TRIVIAL_ROOT_RADIUS};
use crate::wave::CoarseWave;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub step: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Sign of the initial β increment.
    pub direction: f64,
    pub max_points: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Evaluate stability at every k-th point; `None` picks 1 for m ≤ 10 and 5 above.
    pub stability_every: Option<usize>,
    pub detect_hopf: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            step: 0.1,
            step_min: 1e-6,
            step_max: 0.5,
            direction: 1.0,
            max_points: 400,
            beta_min: 0.05,
            beta_max: 25.0,
            stability_every: None,
            detect_hopf: true,
        }
    }
}

impl ContinuationOptions {
    fn cadence(&self, m: usize) -> usize {
        self.stability_every.unwrap_or(if m <= 10 { 1 } else { 5 }).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub beta: f64,
    pub wave: CoarseWave,
    pub stability: Option<StabilityReport>,
    pub secondary_max: Option<SecondaryMax>,
    /// Unit tangent in `(c, T_2..T_m, β)`.
    pub tangent: Vec<f64>,
    pub validated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Grazing,
    Hopf,
    Fold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEvent {
    pub kind: EventKind,
    pub beta: f64,
    pub wave: CoarseWave,
    /// Hopf frequency.
    pub omega: Option<f64>,
    /// Tangency offset of a grazing point.
    pub t_g: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxPoints,
    BetaBound,
    Grazing,
    ValidationLost,
    CorrectorFailure,
    /// Two folds in a row at the same β: the corrector is turning back and
    /// forth on a degenerate point.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub m: usize,
    pub points: Vec<BranchPoint>,
    pub events: Vec<BranchEvent>,
    pub termination: Termination,
}

impl Branch {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &BranchEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazingPoint {
    pub beta_g: f64,
    pub wave: CoarseWave,
    pub t_g: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub beta_hb: f64,
    pub wave: CoarseWave,
    pub omega_hb: f64,
    /// `|E(iω)|` divided by the determinant scale.
    pub residual: f64,
}

/// Window past the last spike scanned by the grazing monitor.
pub fn grazing_span(p: &ModelParams) -> f64 {
    10.0 / p.min_decay()
}

const MONITOR_POINTS: usize = 800;

/// `g = 1 - max ν` on `(c T_m, c T_m + 10 / min(b1, b2)]`; the branch grazes where `g = 0`.
pub fn grazing_monitor(wave: &CoarseWave, p: &ModelParams) -> f64 {
    1.0 - trailing_maximum(wave, p, grazing_span(p), MONITOR_POINTS)
}

fn split(u: &[f64]) -> (CoarseWave, f64) {
    let n = u.len();
    (CoarseWave::from_unknowns(&u[..n - 1]), u[n - 1])
}

fn join(wave: &CoarseWave, beta: f64) -> Vec<f64> {
    let mut u = wave.to_unknowns();
    u.push(beta);
    u
}

fn admissible_ext(u: &[f64]) -> bool {
    let n = u.len();
    u[n - 1] > 0.0 && admissible_unknowns(&u[..n - 1])
}

fn branch_residual(u: &[f64], p: &ModelParams) -> Result<Vec<f64>> {
    if !admissible_ext(u) {
        return Err(Error::OrderViolation(format!("inadmissible continuation point {u:?}")));
    }
    let (wave, beta) = split(u);
    Ok(threshold_residuals(&wave, &p.with_beta(beta)))
}

/// Unit null direction of the `m × (m+1)` Jacobian, oriented along `reference`.
fn tangent_at(u: &[f64], p: &ModelParams, reference: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    let jac = fd_jacobian(&|x: &[f64]| branch_residual(x, p), u, fd_step)?;
    let n = u.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    a.view_mut((0, 0), (n - 1, n)).copy_from(&jac);
    for k in 0..n {
        a[(n - 1, k)] = reference[k];
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let t = a.lu().solve(&rhs).ok_or(Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
    let norm = t.norm();
    let mut t: Vec<f64> = t.iter().map(|x| x / norm).collect();
    if t.iter().zip(reference).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
        t.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(t)
}

struct Corrected {
    u: Vec<f64>,
    iterations: usize,
}

fn correct(pred: &[f64], tangent: &[f64], p: &ModelParams, opts: &NewtonOptions) -> Result<Corrected> {
    let f = |u: &[f64]| {
        let mut r = branch_residual(u, p)?;
        r.push(u.iter().zip(pred).zip(tangent).map(|((a, b), t)| (a - b) * t).sum());
        Ok(r)
    };
    let limited = NewtonOptions { max_iter: opts.max_iter.min(12), ..*opts };
    let out = damped_newton(f, admissible_ext, pred, limited)?;
    Ok(Corrected { u: out.x, iterations: out.iterations })
}

struct Tracker<'a> {
    p: &'a ModelParams,
    numerics: Numerics,
    classify: ClassifyOptions,
}

impl Tracker<'_> {
    fn solve_opts(&self) -> SolveOptions {
        self.numerics.into()
    }

    fn params(&self, beta: f64) -> ModelParams {
        self.p.with_beta(beta)
    }

    fn stability(&self, wave: &CoarseWave, beta: f64, seeds: &[Complex64]) -> Result<StabilityReport> {
        classify_seeded(wave, &self.params(beta), &self.classify, seeds)
    }

    /// Corrects the chord point `a + s (b - a)` back onto the branch, constrained
    /// to the hyperplane normal to the chord; robust near folds.
    fn solve_between(&self, a: &BranchPoint, b: &BranchPoint, s: f64) -> Result<WaveRecord> {
        let ua = join(&a.wave, a.beta);
        let ub = join(&b.wave, b.beta);
        let chord: Vec<f64> = ua.iter().zip(&ub).map(|(x, y)| y - x).collect();
        let len = chord.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dir: Vec<f64> = chord.iter().map(|x| x / len).collect();
        let pred: Vec<f64> = ua.iter().zip(&chord).map(|(x, d)| x + s * d).collect();
        let newton = self.solve_opts().newton();
        let out = correct(&pred, &dir, self.p, &newton)?;
        let (wave, beta) = split(&out.u);
        let pb = self.params(beta);
        let residual = max_norm(&threshold_residuals(&wave, &pb));
        Ok(validate(wave, &pb, residual, &self.solve_opts()))
    }

    fn refine_grazing(&self, a: &BranchPoint, b: &BranchPoint) -> Result<GrazingPoint> {
        // Bisection in the blend parameter on g, then the extended system.
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = (a.wave.clone(), a.beta);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let rec = self.solve_between(a, b, mid)?;
            let g = grazing_monitor(&rec.wave, &self.params(rec.beta));
            if g > 0.0 {
                lo = mid;
                best = (rec.wave, rec.beta);
            } else {
                hi = mid;
            }
            if (hi - lo) * (b.beta - a.beta).abs() < 1e-10 {
                break;
            }
        }
        let (wave, beta) = best;
        let p = self.params(beta);
        let sec = secondary_maximum(&wave, &p, wave.width(), wave.width() + grazing_span(&p), MONITOR_POINTS)
            .ok_or_else(|| Error::TangencyOrderViolation("no trailing maximum near the grazing bracket".into()))?;
        solve_grazing(&wave, sec.xi / wave.c, beta, self.p, &self.numerics)
    }

    /// Bisects on the number of unstable roots between two stability points and
    /// polishes the crossing pair with the Hopf system.
    fn refine_hopf(&self, a: &BranchPoint, b: &BranchPoint, count_a: usize) -> Result<HopfPoint> {
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut probe: Option<(WaveRecord, StabilityReport)> = None;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let rec = self.solve_between(a, b, mid)?;
            let rep = self.stability(&rec.wave, rec.beta, &root_seeds(a, b))?;
            if unstable_count(&rep) == count_a {
                lo = mid;
            } else {
                hi = mid;
            }
            probe = Some((rec, rep));
            if (hi - lo) * (b.beta - a.beta).abs() < 1e-9 {
                break;
            }
        }
        let (rec, rep) = probe.expect("bisection runs at least once");
        // The crossing pair is the non-trivial complex root nearest the imaginary axis.
        let omega = rep
            .roots
            .iter()
            .filter(|r| r.lambda.im > 1e-6)
            .min_by(|x, y| x.lambda.re.abs().total_cmp(&y.lambda.re.abs()))
            .map(|r| r.lambda.im)
            .ok_or(Error::ZeroFrequencyCollapse)?;
        solve_hopf(&rec.wave, rec.beta, omega, self.p, &self.numerics)
    }
}

fn root_seeds(a: &BranchPoint, b: &BranchPoint) -> Vec<Complex64> {
    [a, b]
        .iter()
        .filter_map(|p| p.stability.as_ref())
        .flat_map(|s| s.roots.iter().map(|r| r.lambda))
        .collect()
}

/// Non-trivial roots with positive real part, counting each conjugate pair once.
pub fn unstable_count(rep: &StabilityReport) -> usize {
    rep.roots
        .iter()
        .filter(|r| r.lambda.im >= 0.0 && r.lambda.re > 0.0 && r.lambda.norm() > TRIVIAL_ROOT_RADIUS)
        .count()
}

/// Pseudo-arclength continuation in `(c, T_2..T_m, β)` from a converged wave.
pub fn continue_branch(
    start: &WaveRecord,
    p: &ModelParams,
    opts: &ContinuationOptions,
    numerics: &Numerics,
    mode: ExecutionMode,
) -> Result<Branch> {
    let m = start.wave.m();
    let newton = SolveOptions::from(*numerics).newton();
    let tracker = Tracker {
        p,
        numerics: *numerics,
        classify: ClassifyOptions { mode, ..ClassifyOptions::from(*numerics) },
    };
    let cadence = opts.cadence(m);
    let n = m + 1;
    let mut u = join(&start.wave, start.beta);
    let mut seed_dir = vec![0.0; n];
    seed_dir[n - 1] = opts.direction.signum();
    let mut tangent = tangent_at(&u, p, &seed_dir, numerics.finite_diff_step)?;

    let make_point = |u: &[f64], tangent: Vec<f64>, index: usize, seeds: &[Complex64]| -> Result<BranchPoint> {
        let (wave, beta) = split(u);
        let pb = p.with_beta(beta);
        let residual = max_norm(&threshold_residuals(&wave, &pb));
        let rec = validate(wave, &pb, residual, &tracker.solve_opts());
        let stability = if opts.detect_hopf && index % cadence == 0 {
            Some(tracker.stability(&rec.wave, beta, seeds)?)
        } else {
            None
        };
        Ok(BranchPoint {
            beta,
            wave: rec.wave,
            stability,
            secondary_max: rec.secondary_max,
            tangent,
            validated: rec.validated,
        })
    };

    let mut points = vec![make_point(&u, tangent.clone(), 0, &[])?];
    let mut seeds: Vec<Complex64> = Vec::new();
    let mut events = Vec::new();
    let mut h = opts.step;
    let mut last_stab: Option<(usize, usize)> = points[0].stability.as_ref().map(|s| (0, unstable_count(s)));
    let termination = loop {
        if points.len() >= opts.max_points {
            break Termination::MaxPoints;
        }
        let pred: Vec<f64> = u.iter().zip(&tangent).map(|(a, t)| a + h * t).collect();
        let corrected = correct(&pred, &tangent, p, &newton);
        let Ok(Corrected { u: un, iterations }) = corrected else {
            h *= 0.5;
            if h < opts.step_min {
                break Termination::CorrectorFailure;
            }
            continue;
        };
        let tn = match tangent_at(&un, p, &tangent, numerics.finite_diff_step) {
            Ok(t) => t,
            Err(_) => {
                h *= 0.5;
                if h < opts.step_min {
                    break Termination::CorrectorFailure;
                }
                continue;
            }
        };
        let index = points.len();
        let point = make_point(&un, tn.clone(), index, &seeds)?;
        let prev = points.last().expect("branch is never empty");

        // Fold: the β-component of the tangent changes sign.
        let folded = tn[n - 1] * tangent[n - 1] < 0.0;
        if folded {
            let w = tangent[n - 1] / (tangent[n - 1] - tn[n - 1]);
            let beta = prev.beta + w * (point.beta - prev.beta);
            if events.last().is_some_and(|e: &BranchEvent| e.kind == EventKind::Fold && (e.beta - beta).abs() < 1e-6) {
                break Termination::Stalled;
            }
            events.push(BranchEvent { kind: EventKind::Fold, beta, wave: prev.wave.clone(), omega: None, t_g: None });
        }

        let g_prev = grazing_monitor(&prev.wave, &p.with_beta(prev.beta));
        let g_new = grazing_monitor(&point.wave, &p.with_beta(point.beta));
        if g_prev > 0.0 && g_new <= 0.0 {
            let event = match tracker.refine_grazing(prev, &point) {
                Ok(gp) => BranchEvent {
                    kind: EventKind::Grazing,
                    beta: gp.beta_g,
                    wave: gp.wave,
                    omega: None,
                    t_g: Some(gp.t_g),
                },
                Err(_) => BranchEvent {
                    kind: EventKind::Grazing,
                    beta: 0.5 * (prev.beta + point.beta),
                    wave: prev.wave.clone(),
                    omega: None,
                    t_g: prev.secondary_max.map(|s| s.xi / prev.wave.c),
                },
            };
            events.push(event);
            break Termination::Grazing;
        }
        if !point.validated && prev.validated {
            points.push(point);
            break Termination::ValidationLost;
        }

        if let (Some((k, count_prev)), Some(stab)) = (last_stab, point.stability.as_ref()) {
            // A change in the unstable count is a Hopf point unless a real root
            // crossed (folds); the refinement decides which.
            if unstable_count(stab) != count_prev && !folded {
                let seen = |hp: &HopfPoint| {
                    events.iter().any(|e: &BranchEvent| {
                        e.kind == EventKind::Hopf
                            && (e.beta - hp.beta_hb).abs() < 1e-6
                            && e.omega.is_some_and(|w| (w - hp.omega_hb).abs() < 1e-6)
                    })
                };
                if let Some(hp) = tracker.refine_hopf(&points[k], &point, count_prev).ok().filter(|hp| !seen(hp)) {
                    events.push(BranchEvent {
                        kind: EventKind::Hopf,
                        beta: hp.beta_hb,
                        wave: hp.wave,
                        omega: Some(hp.omega_hb),
                        t_g: None,
                    });
                }
            }
        }
        if let Some(stab) = point.stability.as_ref() {
            last_stab = Some((index, unstable_count(stab)));
            seeds = stab.roots.iter().map(|r| r.lambda).collect();
        }

        let beta = point.beta;
        points.push(point);
        u = un;
        tangent = tn;
        if beta < opts.beta_min || beta > opts.beta_max {
            break Termination::BetaBound;
        }
        if iterations <= 3 {
            h = (h * 1.3).min(opts.step_max);
        }
    };
    Ok(Branch { m, points, events, termination })
}

fn grazing_unknowns(wave: &CoarseWave, t_g: f64, beta: f64) -> Vec<f64> {
    let mut u = wave.to_unknowns();
    u.push(t_g);
    u.push(beta);
    u
}

/// Grazing system: `m` threshold conditions, `ν(c T_G) = 1` and `ν'(c T_G) = 0`
/// in the unknowns `(c, T_2..T_m, T_G, β)`.
pub fn grazing_residual(u: &[f64], p: &ModelParams) -> Result<Vec<f64>> {
    let n = u.len();
    let beta = u[n - 1];
    let t_g = u[n - 2];
    let wave = CoarseWave::from_unknowns(&u[..n - 2]);
    if !(beta > 0.0) || !admissible_unknowns(&u[..n - 2]) {
        return Err(Error::OrderViolation(format!("inadmissible grazing iterate {u:?}")));
    }
    if !(t_g > wave.t[wave.m() - 1]) {
        return Err(Error::TangencyOrderViolation(format!("T_G = {t_g} ≤ T_m = {}", wave.t[wave.m() - 1])));
    }
    let pb = p.with_beta(beta);
    let mut r = threshold_residuals(&wave, &pb);
    let xg = wave.c * t_g;
    r.push(profile_nu(xg, &wave, &pb) - 1.0);
    r.push(profile_slope(xg, &wave, &pb));
    Ok(r)
}

pub fn solve_grazing(wave: &CoarseWave, t_g: f64, beta: f64, p: &ModelParams, numerics: &Numerics) -> Result<GrazingPoint> {
    if !(t_g > wave.t[wave.m() - 1]) {
        return Err(Error::TangencyOrderViolation(format!("guess T_G = {t_g} is not beyond T_m")));
    }
    let u0 = grazing_unknowns(wave, t_g, beta);
    let admissible = |u: &[f64]| {
        let n = u.len();
        u[n - 1] > 0.0 && admissible_unknowns(&u[..n - 2]) && u[n - 2] > u[n - 3].max(0.0)
    };
    let opts = NewtonOptions { max_iter: numerics.max_iter.max(60), ..SolveOptions::from(*numerics).newton() };
    let out = damped_newton(|u| grazing_residual(u, p), admissible, &u0, opts)?;
    let n = out.x.len();
    Ok(GrazingPoint {
        beta_g: out.x[n - 1],
        t_g: out.x[n - 2],
        wave: CoarseWave::from_unknowns(&out.x[..n - 2]),
        residual: out.residual,
    })
}

/// Hopf system: `m` threshold conditions and `E(iω) = 0` in `(c, T_2..T_m, β, ω)`.
pub fn hopf_residual(u: &[f64], p: &ModelParams) -> Result<Vec<f64>> {
    let n = u.len();
    let omega = u[n - 1];
    let beta = u[n - 2];
    if !(beta > 0.0) || !admissible_unknowns(&u[..n - 2]) {
        return Err(Error::OrderViolation(format!("inadmissible Hopf iterate {u:?}")));
    }
    let wave = CoarseWave::from_unknowns(&u[..n - 2]);
    let pb = p.with_beta(beta);
    let mut r = threshold_residuals(&wave, &pb);
    let mats = build_matrices(&wave, &pb)?;
    let e = evaluate_e(Complex64::new(0.0, omega), &mats)? / mats.scale();
    r.push(e.re);
    r.push(e.im);
    Ok(r)
}

pub fn solve_hopf(wave: &CoarseWave, beta: f64, omega: f64, p: &ModelParams, numerics: &Numerics) -> Result<HopfPoint> {
    if !(omega > 0.0) {
        return Err(Error::ZeroFrequencyCollapse);
    }
    let mut u0 = wave.to_unknowns();
    u0.push(beta);
    u0.push(omega);
    let admissible = |u: &[f64]| {
        let n = u.len();
        u[n - 2] > 0.0 && u[n - 1] > 1e-6 && admissible_unknowns(&u[..n - 2])
    };
    let opts = NewtonOptions { max_iter: numerics.max_iter.max(60), ..SolveOptions::from(*numerics).newton() };
    let out = damped_newton(|u| hopf_residual(u, p), admissible, &u0, opts)?;
    let n = out.x.len();
    let omega_hb = out.x[n - 1];
    if omega_hb.abs() < 1e-6 {
        return Err(Error::ZeroFrequencyCollapse);
    }
    Ok(HopfPoint {
        beta_hb: out.x[n - 2],
        wave: CoarseWave::from_unknowns(&out.x[..n - 2]),
        omega_hb,
        residual: out.residual,
    })
}

/// Parameter freed alongside β when continuing grazing or Hopf points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecondaryParam {
    #[serde(rename = "I")]
    Drive,
    A1,
    A2,
    B1,
    B2,
}

impl SecondaryParam {
    pub fn get(self, p: &ModelParams) -> f64 {
        match self {
            Self::Drive => p.drive,
            Self::A1 => p.a1,
            Self::A2 => p.a2,
            Self::B1 => p.b1,
            Self::B2 => p.b2,
        }
    }

    pub fn set(self, p: &mut ModelParams, v: f64) {
        match self {
            Self::Drive => p.drive = v,
            Self::A1 => p.a1 = v,
            Self::A2 => p.a2 = v,
            Self::B1 => p.b1 = v,
            Self::B2 => p.b2 = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusPoint {
    pub gamma: f64,
    pub beta: f64,
    /// Hopf frequency or grazing offset `T_G`, depending on the locus.
    pub aux: f64,
    pub c: f64,
}

/// Hopf locus in `(γ, β)`: steps the secondary parameter `γ` and re-solves the
/// Hopf system from the previous point.
pub fn continue_hopf_locus(
    start: &HopfPoint,
    p: &ModelParams,
    param: SecondaryParam,
    step: f64,
    steps: usize,
    numerics: &Numerics,
) -> Result<Vec<LocusPoint>> {
    let mut q = *p;
    let mut cur = start.clone();
    let mut out = vec![LocusPoint { gamma: param.get(&q), beta: cur.beta_hb, aux: cur.omega_hb, c: cur.wave.c }];
    for _ in 0..steps {
        let next = param.get(&q) + step;
        param.set(&mut q, next);
        cur = solve_hopf(&cur.wave, cur.beta_hb, cur.omega_hb, &q, numerics)?;
        out.push(LocusPoint { gamma: param.get(&q), beta: cur.beta_hb, aux: cur.omega_hb, c: cur.wave.c });
    }
    Ok(out)
}

/// Grazing locus in `(γ, β)`, analogous to [`continue_hopf_locus`].
pub fn continue_grazing_locus(
    start: &GrazingPoint,
    p: &ModelParams,
    param: SecondaryParam,
    step: f64,
    steps: usize,
    numerics: &Numerics,
) -> Result<Vec<LocusPoint>> {
    let mut q = *p;
    let mut cur = start.clone();
    let mut out = vec![LocusPoint { gamma: param.get(&q), beta: cur.beta_g, aux: cur.t_g, c: cur.wave.c }];
    for _ in 0..steps {
        let next = param.get(&q) + step;
        param.set(&mut q, next);
        cur = solve_grazing(&cur.wave, cur.t_g, cur.beta_g, &q, numerics)?;
        out.push(LocusPoint { gamma: param.get(&q), beta: cur.beta_g, aux: cur.t_g, c: cur.wave.c });
    }
    Ok(out)
}

/// Seed for the grazing point of `m + 1` spikes: the tangency becomes a spike
/// halfway between `T_m` and `T_G`, and the old tangency is kept.
pub fn bootstrap_grazing_guess(g: &GrazingPoint) -> (CoarseWave, f64) {
    let tm = g.wave.t[g.wave.m() - 1];
    let mut t = g.wave.t.clone();
    t.push(0.5 * (tm + g.t_g));
    (CoarseWave { c: g.wave.c, t }, g.t_g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub m: usize,
    pub beta_g: f64,
    pub c: f64,
    pub t_m: f64,
    pub width: f64,
    pub t_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    /// Grazing point at the largest computed `m`.
    pub last: GrazingPoint,
    /// Set when the chain broke before the end of the range.
    pub broken_at: Option<usize>,
}

/// Grazing points for consecutive `m`, each seeded from the previous one.
pub fn grazing_scaling_study(first: &GrazingPoint, m_max: usize, p: &ModelParams, numerics: &Numerics) -> Result<ScalingStudy> {
    let row = |g: &GrazingPoint| {
        let t_m = g.wave.t[g.wave.m() - 1];
        ScalingRow { m: g.wave.m(), beta_g: g.beta_g, c: g.wave.c, t_m, width: g.wave.c * t_m, t_g: g.t_g }
    };
    let mut rows = vec![row(first)];
    let mut last = first.clone();
    let mut broken_at = None;
    while last.wave.m() < m_max {
        let (guess, t_g) = bootstrap_grazing_guess(&last);
        match solve_grazing(&guess, t_g, last.beta_g, p, numerics) {
            Ok(g) => {
                rows.push(row(&g));
                last = g;
            }
            Err(_) => {
                broken_at = Some(last.wave.m() + 1);
                break;
            }
        }
    }
    Ok(ScalingStudy { rows, last, broken_at })
}

/// Instantaneous firing rate `1 / (T_{i+1} - T_i)` against position `c T_i`.
pub fn gain_curve(wave: &CoarseWave) -> Vec<(f64, f64)> {
    wave.t.windows(2).map(|w| (wave.c * w[0], 1.0 / (w[1] - w[0]))).collect()
}

/// Residual norm of a grazing point, for reporting.
pub fn grazing_residual_norm(g: &GrazingPoint, p: &ModelParams) -> Result<f64> {
    Ok(max_norm(&grazing_residual(&grazing_unknowns(&g.wave, g.t_g, g.beta_g), p)?))
}
