//! Linear stability of travelling waves through the complex function
//! `E(z) = det[D - M(z)]`.
//!
//! Substituting `y = c (X + T_ji)` turns each entry into
//!
//! ```text
//! M_ij(z) = e^{T_ji} 1_{j<i} + c Σ_k A_k Σ_seg ∫ e^{a - γ X} ψ(X) dX,
//! a = -c (z + s b_k) T_ji,   γ = 1 + c (z + s b_k),
//! ```
//!
//! with `s = +1` where `y ≥ 0` and `s = -1` on the piece `X ∈ [0, -T_ji]` that
//! exists when `T_ji < 0`. Since `ψ` is a combination of `1` and `e^{-(β-1)X}`
//! every piece is an elementary exponential integral.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expo::{exp_segment, exp_segment_linear};
use crate::kernel::{kernel_w, psi_of_offset, BETA_ONE_WINDOW};
use crate::params::{ModelParams, Numerics};
use crate::parallel::ExecutionMode;
use crate::quad;
use crate::wave::CoarseWave;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Roots closer than this to the origin are the translational root.
pub const TRIVIAL_ROOT_RADIUS: f64 = 1e-6;

fn psi_segment(a: Complex64, gamma: Complex64, x0: f64, x1: f64, beta: f64) -> Complex64 {
    let d = beta - 1.0;
    if d.abs() < BETA_ONE_WINDOW {
        exp_segment(a, gamma, x0, x1) * beta - exp_segment_linear(a, gamma, x0, x1) * (beta * beta)
    } else {
        (exp_segment(a, gamma + d, x0, x1) * (beta * beta) - exp_segment(a, gamma, x0, x1) * beta) / d
    }
}

fn entry(i: usize, j: usize, z: Complex64, wave: &CoarseWave, p: &ModelParams) -> Complex64 {
    let c = wave.c;
    let t = wave.t[j] - wave.t[i];
    let mut sum = ZERO;
    for (amp, b) in p.kernel_terms() {
        if amp == 0.0 {
            continue;
        }
        let piece = |s: f64, x0: f64, x1: f64| {
            let zs = z + s * b;
            psi_segment(-c * zs * t, 1.0 + c * zs, x0, x1, p.beta)
        };
        let integral = if t >= 0.0 {
            piece(1.0, 0.0, f64::INFINITY)
        } else {
            piece(-1.0, 0.0, -t) + piece(1.0, -t, f64::INFINITY)
        };
        sum += integral * (amp * c);
    }
    if j < i {
        sum += t.exp();
    }
    sum
}

fn check_strip(z: Complex64, p: &ModelParams) -> Result<()> {
    if z.re > -p.eta && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Re z = {} outside the strip Re z > -{}", z.re, p.eta)))
    }
}

/// Entry `M_ij(z)` (zero-based indices).
pub fn stability_entry_m(i: usize, j: usize, z: Complex64, wave: &CoarseWave, p: &ModelParams) -> Result<Complex64> {
    check_strip(z, p)?;
    Ok(entry(i, j, z, wave, p))
}

/// `D` and a way to assemble `M(z)` for one wave.
#[derive(Debug, Clone)]
pub struct StabilityMatrices {
    pub m: usize,
    pub d: Vec<f64>,
    wave: CoarseWave,
    params: ModelParams,
}

pub fn build_matrices(wave: &CoarseWave, p: &ModelParams) -> Result<StabilityMatrices> {
    wave.check()?;
    let m = wave.m();
    let d = (0..m)
        .map(|i| (0..m).map(|k| entry(i, k, ZERO, wave, p).re).sum())
        .collect();
    Ok(StabilityMatrices { m, d, wave: wave.clone(), params: *p })
}

impl StabilityMatrices {
    pub fn wave(&self) -> &CoarseWave {
        &self.wave
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn m_at(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        check_strip(z, &self.params)?;
        Ok(DMatrix::from_fn(self.m, self.m, |i, j| entry(i, j, z, &self.wave, &self.params)))
    }

    /// `D - M(z)`.
    pub fn system(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let mut a = -self.m_at(z)?;
        for (i, d) in self.d.iter().enumerate() {
            a[(i, i)] += d;
        }
        Ok(a)
    }

    /// `Π max(|D_i|, 1)`, the normalisation used for tolerance tests on `E`.
    pub fn scale(&self) -> f64 {
        self.d.iter().map(|d| d.abs().max(1.0)).product()
    }
}

/// `E(z) = det[D - M(z)]`.
pub fn evaluate_e(z: Complex64, mats: &StabilityMatrices) -> Result<Complex64> {
    Ok(mats.system(z)?.lu().determinant())
}

fn scaled_e(z: Complex64, mats: &StabilityMatrices) -> Result<Complex64> {
    Ok(evaluate_e(z, mats)? / mats.scale())
}

/// Rectangle scanned for roots; only `Im z ≥ 0` is searched, the rest follows by conjugacy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_max: f64,
}

impl RootWindow {
    /// `Re ∈ [-η + 0.05, 1]`, `Im ∈ [0, 20 β]`.
    pub fn for_params(p: &ModelParams) -> Self {
        Self { re_min: -p.eta + 0.05, re_max: 1.0, im_max: 20.0 * p.beta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootGrid {
    pub re_count: usize,
    pub im_count: usize,
}

impl Default for RootGrid {
    fn default() -> Self {
        Self { re_count: 101, im_count: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRoot {
    pub lambda: Complex64,
    /// Kernel vector of `D - M(λ)`, scaled so its largest entry is exactly 1.
    pub phi: Vec<Complex64>,
    /// `|E(λ)|` divided by [`StabilityMatrices::scale`].
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSearch {
    pub roots: Vec<StabilityRoot>,
    /// Candidates whose polish diverged or left the window.
    pub dropped: usize,
}

/// Samples of `E / scale` on the window grid, row-major in `(im, re)`.
pub fn e_grid(
    mats: &StabilityMatrices,
    window: &RootWindow,
    grid: &RootGrid,
    mode: ExecutionMode,
) -> Result<Vec<(Complex64, Complex64)>> {
    let nr = grid.re_count.max(2);
    let ni = grid.im_count.max(2);
    let hr = (window.re_max - window.re_min) / (nr - 1) as f64;
    let hi = window.im_max / (ni - 1) as f64;
    mode.map_range(nr * ni, |k| {
        let z = Complex64::new(window.re_min + hr * (k % nr) as f64, hi * (k / nr) as f64);
        scaled_e(z, mats).map(|e| (z, e))
    })
    .into_iter()
    .collect()
}

fn straddles(vals: [f64; 4]) -> bool {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lo <= 0.0 && hi >= 0.0
}

fn candidates(samples: &[(Complex64, Complex64)], nr: usize, ni: usize) -> Vec<Complex64> {
    let at = |r: usize, i: usize| samples[i * nr + r];
    let mut out = vec![ZERO];
    for i in 0..ni - 1 {
        for r in 0..nr - 1 {
            let corners = [at(r, i), at(r + 1, i), at(r, i + 1), at(r + 1, i + 1)];
            let re = corners.map(|c| c.1.re);
            let im = corners.map(|c| c.1.im);
            if straddles(re) && straddles(im) {
                out.push((corners[0].0 + corners[3].0) * 0.5);
            }
        }
    }
    // Local minima of |E| catch near-tangential level sets the cell test misses.
    for i in 0..ni {
        for r in 1..nr - 1 {
            let v = at(r, i).1.norm();
            let mut is_min = true;
            for di in -1i64..=1 {
                for dr in -1i64..=1 {
                    let (ii, rr) = (i as i64 + di, r as i64 + dr);
                    if (di, dr) == (0, 0) || ii < 0 || ii >= ni as i64 {
                        continue;
                    }
                    if at(rr as usize, ii as usize).1.norm() < v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                out.push(at(r, i).0);
            }
        }
    }
    out
}

/// Complex Newton on `E / scale` with a central-difference derivative.
fn polish(z0: Complex64, mats: &StabilityMatrices, window: &RootWindow, root_tol: f64) -> Option<(Complex64, f64)> {
    const H: f64 = 1e-7;
    let span = (window.re_max - window.re_min).max(window.im_max);
    let mut z = z0;
    let mut e = scaled_e(z, mats).ok()?;
    for _ in 0..80 {
        let ep = scaled_e(z + H, mats).ok()?;
        let em = scaled_e(z - H, mats).ok()?;
        let de = (ep - em) / (2.0 * H);
        if de.norm() == 0.0 || !de.is_finite() {
            return None;
        }
        let mut step = e / de;
        // Limit wild steps to a fraction of the window.
        let cap = 0.1 * span;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        let zn = z - step;
        let en = scaled_e(zn, mats).ok()?;
        z = zn;
        e = en;
        if step.norm() <= 1e-14 * (1.0 + z.norm()) || e.norm() <= 1e-3 * root_tol {
            if e.norm() > root_tol {
                continue;
            }
            break;
        }
    }
    let r = e.norm();
    (r <= root_tol && z.is_finite()).then_some((z, r))
}

/// Unit-max-entry vector spanning the smallest singular direction of `D - M(λ)`.
pub fn kernel_vector(mats: &StabilityMatrices, lambda: Complex64) -> Result<(Vec<Complex64>, f64)> {
    let a = mats.system(lambda)?;
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Domain("singular value decomposition failed".into()))?;
    let sv = &svd.singular_values;
    let (k, smin) = sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, s)| if *s < acc.1 { (k, *s) } else { acc });
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let phi: Vec<Complex64> = (0..mats.m).map(|c| v_t[(k, c)].conj()).collect();
    let pivot = phi.iter().copied().fold(ZERO, |best, x| if x.norm() > best.norm() { x } else { best });
    let phi = phi.into_iter().map(|x| x / pivot).collect();
    Ok((phi, if smax > 0.0 { smin / smax } else { 0.0 }))
}

/// Locates roots of `E` in the window: grid scan, complex Newton polish,
/// deduplication, conjugate mirroring and kernel vectors.
pub fn find_roots(
    mats: &StabilityMatrices,
    window: &RootWindow,
    grid: &RootGrid,
    root_tol: f64,
    mode: ExecutionMode,
) -> Result<RootSearch> {
    find_roots_seeded(mats, window, grid, root_tol, mode, &[])
}

/// [`find_roots`] with extra Newton starting points, typically the roots of a
/// nearby wave on the same branch.
pub fn find_roots_seeded(
    mats: &StabilityMatrices,
    window: &RootWindow,
    grid: &RootGrid,
    root_tol: f64,
    mode: ExecutionMode,
    seeds: &[Complex64],
) -> Result<RootSearch> {
    let nr = grid.re_count.max(2);
    let ni = grid.im_count.max(2);
    let samples = e_grid(mats, window, grid, mode)?;
    let mut cands = candidates(&samples, nr, ni);
    cands.extend(seeds.iter().filter(|z| z.im >= 0.0));
    let polished = mode.map(&cands, |z| polish(*z, mats, window, root_tol));
    let slack = 1e-6;
    let mut dropped = 0;
    let mut found: Vec<(Complex64, f64)> = Vec::new();
    for res in polished {
        let Some((mut z, r)) = res else {
            dropped += 1;
            continue;
        };
        if z.im < 0.0 {
            z = z.conj();
        }
        if z.im.abs() < 1e-9 {
            let real = Complex64::new(z.re, 0.0);
            if let Ok(e) = scaled_e(real, mats) {
                if e.norm() <= root_tol {
                    z = real;
                }
            }
        }
        let inside = z.re >= window.re_min - slack && z.re <= window.re_max + slack && z.im <= window.im_max + slack;
        if !inside {
            dropped += 1;
            continue;
        }
        if found.iter().any(|(w, _)| (*w - z).norm() < 1e-6) {
            continue;
        }
        found.push((z, r));
    }
    let mut with_mirror = found.clone();
    for (z, r) in &found {
        if z.im != 0.0 {
            with_mirror.push((z.conj(), *r));
        }
    }
    with_mirror.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
    let roots = with_mirror
        .into_iter()
        .map(|(lambda, residual)| {
            let (phi, _) = kernel_vector(mats, lambda)?;
            Ok(StabilityRoot { lambda, phi, residual })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RootSearch { roots, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub wave: CoarseWave,
    pub beta: f64,
    pub roots: Vec<StabilityRoot>,
    pub classification: Classification,
    /// Non-trivial root with the largest real part.
    pub leading: Option<StabilityRoot>,
    pub dropped: usize,
}

impl StabilityReport {
    /// Largest real part among non-trivial roots, `-∞` when there are none.
    pub fn leading_real_part(&self) -> f64 {
        self.leading.as_ref().map_or(f64::NEG_INFINITY, |r| r.lambda.re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub window: Option<RootWindow>,
    pub grid: RootGrid,
    pub root_tol: f64,
    pub class_tol: f64,
    pub mode: ExecutionMode,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Numerics::default().into()
    }
}

impl From<Numerics> for ClassifyOptions {
    fn from(n: Numerics) -> Self {
        Self {
            window: None,
            grid: RootGrid::default(),
            root_tol: n.root_tol,
            class_tol: n.class_tol,
            mode: ExecutionMode::default(),
        }
    }
}

pub fn classify(wave: &CoarseWave, p: &ModelParams, opts: &ClassifyOptions) -> Result<StabilityReport> {
    classify_seeded(wave, p, opts, &[])
}

/// [`classify`] with extra root seeds passed to [`find_roots_seeded`].
pub fn classify_seeded(
    wave: &CoarseWave,
    p: &ModelParams,
    opts: &ClassifyOptions,
    seeds: &[Complex64],
) -> Result<StabilityReport> {
    let mats = build_matrices(wave, p)?;
    let window = opts.window.unwrap_or_else(|| RootWindow::for_params(p));
    let search = find_roots_seeded(&mats, &window, &opts.grid, opts.root_tol, opts.mode, seeds)?;
    let leading = search
        .roots
        .iter()
        .filter(|r| r.lambda.norm() > TRIVIAL_ROOT_RADIUS)
        .max_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re).then(a.lambda.im.total_cmp(&b.lambda.im)))
        .cloned();
    let classification = match leading.as_ref().map(|r| r.lambda.re) {
        None => Classification::Stable,
        Some(re) if re < -opts.class_tol => Classification::Stable,
        Some(re) if re > opts.class_tol => Classification::Unstable,
        Some(_) => Classification::Marginal,
    };
    Ok(StabilityReport {
        wave: wave.clone(),
        beta: p.beta,
        roots: search.roots,
        classification,
        leading,
        dropped: search.dropped,
    })
}

/// Linearised operator applied to the exponential mode `φ_j(x) = Φ_j e^{λx}`,
/// by direct quadrature of
///
/// ```text
/// (Lφ)_i(x) = Σ_j e^{T_ji} [ (φ_i - φ_j)(x) 1_{j<i}
///             + ∫_{cT_ji}^∞ e^{-y/c} w(y) ψ_ij(y) (φ_i(x) - φ_j(x - y)) dy ].
/// ```
///
/// Returns `(Lφ)_i(x) e^{-λx}` for each `x` in `xs` (outer) and `i` (inner).
pub fn linearized_apply(
    lambda: Complex64,
    phi: &[Complex64],
    wave: &CoarseWave,
    p: &ModelParams,
    xs: &[f64],
    tol: f64,
) -> Result<Vec<Vec<Complex64>>> {
    check_strip(lambda, p)?;
    let m = wave.m();
    if phi.len() != m {
        return Err(Error::InvalidParams(format!("mode has {} entries, wave has {m} spikes", phi.len())));
    }
    let c = wave.c;
    let rate = p.beta.min(1.0) / c + p.min_decay() + lambda.re.min(0.0);
    // The mode factor e^{λx} cancels, so the reduced operator is x-independent;
    // it is still evaluated per x to check that claim numerically.
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let ex = (lambda * x).exp();
        let mut row = Vec::with_capacity(m);
        for i in 0..m {
            let mut acc = ZERO;
            for j in 0..m {
                let t = wave.t[j] - wave.t[i];
                let phi_i = phi[i] * ex;
                let weight = t.exp();
                if j < i {
                    acc += (phi_i - phi[j] * ex) * weight;
                }
                let y0 = c * t;
                let g = |y: f64| {
                    let psi = psi_of_offset((y / c - t).max(0.0), p.beta);
                    ((-y / c).exp() * kernel_w(y, p) * psi) * (phi_i - phi[j] * (lambda * (x - y)).exp())
                };
                let scale = (p.a1 + p.a2) * (p.beta + p.beta * p.beta) * (phi_i.norm() + phi[j].norm() * ex.norm())
                    * (-y0 / c).exp().max(1.0)
                    * (-lambda.re * y0).exp().max(1.0);
                let breaks = if y0 < 0.0 { vec![0.0] } else { vec![] };
                let re = quad::integrate_tail(|y| g(y).re, y0, rate, scale, &breaks, tol)?;
                let im = quad::integrate_tail(|y| g(y).im, y0, rate, scale, &breaks, tol)?;
                acc += Complex64::new(re, im) * weight;
            }
            row.push(acc / ex);
        }
        out.push(row);
    }
    Ok(out)
}
