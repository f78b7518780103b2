//! Exponential building blocks shared by the closed-form profiles and the
//! stability matrices.
//!
//! Every closed form in this crate reduces to sums of `e^{-r u}` terms whose
//! coefficients contain differences of rates such as `1/c`, `β/c` and the kernel
//! decay rates. Those differences vanish on codimension-one sets that continuation
//! routinely crosses (β = 1, β = b c, c = 1/b), so they are written as divided
//! differences of `x ↦ e^{-u x}`, which stay finite and accurate at coincident
//! nodes.

use num_complex::Complex64;

/// First divided difference `(e^{-a u} - e^{-b u}) / (b - a)` for `u ≥ 0`.
///
/// Equals `u e^{-a u}` when `a == b`. Symmetric in `a`, `b`.
pub fn exp_dd1(a: f64, b: f64, u: f64) -> f64 {
    let lo = a.min(b);
    let d = (b - a).abs();
    if d == 0.0 {
        return u * (-lo * u).exp();
    }
    (-lo * u).exp() * (-(-d * u).exp_m1() / d)
}

/// Second divided difference `f[x0, x1, x2]` of `f(x) = e^{-u x}`, `u ≥ 0`.
///
/// Always non-negative; equals `u² e^{-u x} / 2` for some `x` in the node hull.
pub fn exp_dd2(x0: f64, x1: f64, x2: f64, u: f64) -> f64 {
    let mut xs = [x0, x1, x2];
    xs.sort_by(|p, q| p.total_cmp(q));
    let [lo, mid, hi] = xs;
    let spread = hi - lo;
    if u * spread <= 0.5 {
        // Series about the smallest node: f[0, d1, d2] with complete homogeneous
        // symmetric polynomials h_k(d1, d2).
        let d1 = mid - lo;
        let d2 = hi - lo;
        let mut sum = 0.0;
        let mut fact_term = u * u / 2.0; // u^k / k! at k = 2
        for k in 2..40usize {
            let j = k - 2;
            let mut h = 0.0;
            let mut p1 = 1.0;
            for i in 0..=j {
                h += p1 * d2.powi((j - i) as i32);
                p1 *= d1;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign * fact_term * h;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            fact_term *= u / (k + 1) as f64;
        }
        return (-u * lo).exp() * sum;
    }
    (exp_dd1(lo, mid, u) - exp_dd1(mid, hi, u)) / spread
}

/// `∫_{x0}^{x1} e^{a - γ x} dx`, with `x1 = ∞` allowed when `Re γ > 0`.
pub fn exp_segment(a: Complex64, gamma: Complex64, x0: f64, x1: f64) -> Complex64 {
    let head = (a - gamma * x0).exp();
    if x1.is_infinite() {
        return head / gamma;
    }
    let len = x1 - x0;
    let gl = gamma * len;
    if gl.norm() < 1e-3 {
        // len · (1 - γL/2 + (γL)²/6 - ...)
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..12 {
            sum += term / (k + 1) as f64;
            term *= -gl / (k + 1) as f64;
        }
        return head * len * sum;
    }
    (head - (a - gamma * x1).exp()) / gamma
}

/// `∫_{x0}^{x1} x e^{a - γ x} dx`, with `x1 = ∞` allowed when `Re γ > 0`.
pub fn exp_segment_linear(a: Complex64, gamma: Complex64, x0: f64, x1: f64) -> Complex64 {
    let head = (a - gamma * x0).exp();
    // ∫_0^L s e^{-γ s} ds
    let first_moment = if x1.is_infinite() {
        Complex64::new(1.0, 0.0) / (gamma * gamma)
    } else {
        let len = x1 - x0;
        let gl = gamma * len;
        if gl.norm() < 1e-3 {
            let mut sum = Complex64::new(0.0, 0.0);
            let mut term = Complex64::new(1.0, 0.0);
            for k in 0..12 {
                sum += term / (k + 2) as f64;
                term *= -gl / (k + 1) as f64;
            }
            sum * len * len
        } else {
            let tail = (-gl).exp() * (1.0 + gl);
            (1.0 - tail) / (gamma * gamma)
        }
    };
    head * (exp_segment(Complex64::new(0.0, 0.0), gamma, 0.0, x1 - x0) * x0 + first_moment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dd1(a: f64, b: f64, u: f64) -> f64 {
        ((-a * u).exp() - (-b * u).exp()) / (b - a)
    }

    #[test]
    fn dd1_matches_naive_away_from_coincidence() {
        for &(a, b, u) in &[(1.0, 4.5, 0.3), (5.0, 0.2, 2.0), (3.5, 3.0, 10.0)] {
            let d = exp_dd1(a, b, u);
            assert!((d - naive_dd1(a, b, u)).abs() < 1e-14, "{a} {b} {u}");
        }
    }

    #[test]
    fn dd1_coincident_limit() {
        let u: f64 = 0.7;
        let exact = u * (-2.0 * u).exp();
        assert!((exp_dd1(2.0, 2.0, u) - exact).abs() < 1e-16);
        assert!((exp_dd1(2.0, 2.0 + 1e-12, u) - exact).abs() < 1e-12);
    }

    #[test]
    fn dd2_matches_recursive_definition() {
        let u = 1.3;
        let f = |x: f64| (-u * x).exp();
        let (x0, x1, x2) = (0.4, 2.0, 5.0);
        let f01 = (f(x1) - f(x0)) / (x1 - x0);
        let f12 = (f(x2) - f(x1)) / (x2 - x1);
        let naive = (f12 - f01) / (x2 - x0);
        assert!((exp_dd2(x0, x1, x2, u) - naive).abs() < 1e-14);
        // Node order is irrelevant.
        assert!((exp_dd2(x2, x0, x1, u) - naive).abs() < 1e-14);
    }

    #[test]
    fn dd2_branches_agree_at_switch() {
        // Just below and above the series threshold.
        let u = 1.0;
        let a = exp_dd2(1.0, 1.2, 1.4999, u);
        let b = exp_dd2(1.0, 1.2, 1.5001, u);
        assert!((a - b).abs() < 1e-4 * a);
        let full = exp_dd2(2.0, 2.0, 2.0, 0.8);
        assert!((full - 0.32 * (-1.6f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn segments_match_closed_forms() {
        let g = Complex64::new(1.5, 0.7);
        let a = Complex64::new(0.1, -0.2);
        let s = exp_segment(a, g, 0.5, 2.0);
        let exact = ((a - g * 0.5).exp() - (a - g * 2.0).exp()) / g;
        assert!((s - exact).norm() < 1e-14);
        let inf = exp_segment(a, g, 0.5, f64::INFINITY);
        assert!((inf - (a - g * 0.5).exp() / g).norm() < 1e-14);
        // x e^{-γx} on [0, ∞) is 1/γ².
        let lin = exp_segment_linear(Complex64::new(0.0, 0.0), g, 0.0, f64::INFINITY);
        assert!((lin - 1.0 / (g * g)).norm() < 1e-14);
        // Finite linear segment against antiderivative -(x/γ + 1/γ²) e^{-γx}.
        let anti = |x: f64| -(x / g + 1.0 / (g * g)) * (-g * x).exp();
        let fin = exp_segment_linear(Complex64::new(0.0, 0.0), g, 0.3, 1.9);
        assert!((fin - (anti(1.9) - anti(0.3))).norm() < 1e-14);
        // Tiny γL uses the series.
        let small = Complex64::new(1e-5, 1e-5);
        let fin = exp_segment_linear(Complex64::new(0.0, 0.0), small, 0.3, 1.9);
        let approx = (1.9f64.powi(2) - 0.09) / 2.0 - small * (1.9f64.powi(3) - 0.027) / 3.0;
        assert!((fin - approx).norm() < 1e-9);
    }
}
