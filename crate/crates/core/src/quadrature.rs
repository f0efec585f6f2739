//! One-dimensional quadrature building blocks.
//!
//! * Gauss–Legendre and Gauss–Jacobi rules on `[-1, 1]` (the latter for
//!   integrands carrying an algebraic endpoint weight).
//! * Tanh–sinh (double exponential) integration on finite intervals, which
//!   absorbs algebraic endpoint singularities without knowing their exponent.
//! * A sinh-mapped trapezoid rule on the whole real line, used for the
//!   Laplace-mixture integrals behind the spatial kernels.
//! * An IMT-transformed adaptive Simpson rule, kept as an independent
//!   cross-check of the double exponential path.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of an interpolatory rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Integrates `f` over `[lo, hi]` with the affine image of the rule.
    ///
    /// For a Jacobi rule the algebraic weight is *not* rescaled; callers
    /// multiply by the appropriate power of the half-length themselves.
    pub fn apply(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre_uncached(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Gauss–Jacobi rule for the weight `(1-x)^a (1+x)^b` on `[-1, 1]`
/// (Golub–Welsch).
fn jacobi_uncached(n: usize, a: f64, b: f64) -> Rule {
    assert!(n >= 1 && a > -1.0 && b > -1.0);
    let ab = a + b;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    diag[0] = (b - a) / (ab + 2.0);
    for (k, d) in diag.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        *d = (b * b - a * a) / (s * (s + 2.0));
    }
    for (idx, o) in off.iter_mut().enumerate() {
        let k = (idx + 1) as f64;
        let s = 2.0 * k + ab;
        let beta = if idx == 0 {
            // (1 + a + b) cancels analytically; keeps a + b = -1 well defined.
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        *o = beta.sqrt();
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(ab + 2.0);
    let mu0 = ln_mu0.exp();
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

type RuleCache = Mutex<HashMap<(usize, u64, u64), Arc<Rule>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached `n`-point Gauss–Legendre rule.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    let key = (n, u64::MAX, u64::MAX);
    if let Some(r) = cache().lock().unwrap().get(&key) {
        return Arc::clone(r);
    }
    let rule = Arc::new(legendre_uncached(n));
    cache().lock().unwrap().insert(key, Arc::clone(&rule));
    rule
}

/// Cached `n`-point Gauss–Jacobi rule for the weight `(1-x)^a (1+x)^b`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Arc<Rule> {
    if a == 0.0 && b == 0.0 {
        return gauss_legendre(n);
    }
    let key = (n, a.to_bits(), b.to_bits());
    if let Some(r) = cache().lock().unwrap().get(&key) {
        return Arc::clone(r);
    }
    let rule = Arc::new(jacobi_uncached(n, a, b));
    cache().lock().unwrap().insert(key, Arc::clone(&rule));
    rule
}

/// `∫_lo^hi (x - lo)^expo g(x) dx` with a Gauss–Jacobi rule (exact for
/// polynomial `g` of degree `< 2n`).
pub fn jacobi_left(n: usize, expo: f64, lo: f64, hi: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    if expo == 0.0 {
        return gauss_legendre(n).apply(lo, hi, g);
    }
    let rule = gauss_jacobi(n, 0.0, expo);
    let half = 0.5 * (hi - lo);
    let s: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&y, &w)| w * g(lo + half * (1.0 + y)))
        .sum();
    s * half.powf(expo + 1.0)
}

/// `∫_lo^hi (hi - x)^expo g(x) dx`, mirror image of [`jacobi_left`].
pub fn jacobi_right(n: usize, expo: f64, lo: f64, hi: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    jacobi_left(n, expo, lo, hi, |x| g(lo + hi - x))
}

/// Outcome of an iteratively refined quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub levels: u32,
}

/// Tanh–sinh rule on `[a, b]`, halving the step until two successive
/// levels agree to `rel_tol` or `max_level` is reached.
///
/// Nodes are generated from their distance to the nearer endpoint, so
/// `f` sees `a + tiny` rather than a rounded `a`; this matters for
/// integrable power singularities sitting exactly at an endpoint.
pub fn tanh_sinh(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_level: u32,
) -> QuadResult {
    let len = b - a;
    if len <= 0.0 {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
            levels: 0,
        };
    }
    // Contribution of node t (and -t) times the step, before scaling by h.
    let mut eval_pair = |t: f64| -> (f64, bool) {
        let y = FRAC_PI_2 * t.sinh();
        let e2y = (2.0 * y).exp();
        let dist = len / (1.0 + e2y);
        if dist <= len * 1e-150 || !dist.is_finite() {
            return (0.0, false);
        }
        let cosh_y = y.cosh();
        let w = 0.5 * len * FRAC_PI_2 * t.cosh() / (cosh_y * cosh_y);
        let mut acc = 0.0;
        for x in [a + dist, b - dist] {
            let v = w * f(x);
            if v.is_finite() {
                acc += v;
            } else if dist > len * 1e-14 {
                acc = f64::NAN;
            }
        }
        (acc, true)
    };

    let t_max = 6.0;
    let mut h = 1.0;
    // Level 0: nodes 0, ±1, ±2, ... (t = 0 counted once).
    let mut sum = 0.5 * eval_pair(0.0).0;
    let mut k = 1.0;
    while k * h <= t_max {
        let (v, live) = eval_pair(k * h);
        if !live {
            break;
        }
        sum += v;
        k += 1.0;
    }
    let mut value = sum * h;
    let mut error = f64::INFINITY;
    let mut level = 0;
    while level < max_level {
        level += 1;
        h *= 0.5;
        let mut k = 1.0;
        while k * h <= t_max {
            let (v, live) = eval_pair(k * h);
            if !live {
                break;
            }
            sum += v;
            k += 2.0;
        }
        let next = sum * h;
        error = (next - value).abs();
        value = next;
        if level >= 3 && error <= rel_tol * value.abs().max(1e-300) {
            return QuadResult {
                value,
                error,
                converged: true,
                levels: level,
            };
        }
    }
    QuadResult {
        value,
        error,
        converged: false,
        levels: level,
    }
}

/// `∫_{-∞}^{∞} exp(log_f(ℓ)) dℓ` for a log-concave-ish integrand with at
/// least exponential decay in both tails, via the substitution
/// `ℓ = center + sinh(τ)` and a trapezoid rule in `τ`.
///
/// `log_f` may return `-∞`. The result is relative-accurate to roughly
/// `rel_tol` for analytic integrands.
pub fn sinh_trapezoid_log(mut log_f: impl FnMut(f64) -> f64, center: f64, rel_tol: f64) -> QuadResult {
    let mut term = |tau: f64| -> f64 {
        let ell = center + tau.sinh();
        let lv = log_f(ell);
        if lv == f64::NEG_INFINITY {
            0.0
        } else {
            (lv + tau.cosh().ln()).exp()
        }
    };
    // Sum over nodes k*h for k of given parity (step 2 when refining), walking
    // outward until terms are negligible.
    let tau_cap = 7.0;
    let t0 = term(0.0);
    let mut walk = |h: f64, start: f64, step: f64, running: f64| -> f64 {
        let mut acc = 0.0;
        for dir in [1.0, -1.0] {
            let mut k = start;
            let mut small = 0;
            while k * h <= tau_cap {
                let v = term(dir * k * h);
                acc += v;
                if v <= 1e-19 * (running + acc).abs() {
                    small += 1;
                    if small >= 3 {
                        break;
                    }
                } else {
                    small = 0;
                }
                k += step;
            }
        }
        acc
    };
    let mut h = 0.5;
    let mut sum = t0;
    sum += walk(h, 1.0, 1.0, sum);
    let mut value = sum * h;
    let mut error = f64::INFINITY;
    let mut level = 0;
    while level < 8 {
        level += 1;
        h *= 0.5;
        sum += walk(h, 1.0, 2.0, sum);
        let next = sum * h;
        error = (next - value).abs();
        value = next;
        if level >= 2 && error <= rel_tol * value.abs().max(1e-300) {
            return QuadResult {
                value,
                error,
                converged: true,
                levels: level,
            };
        }
    }
    QuadResult {
        value,
        error,
        converged: false,
        levels: level,
    }
}

/// Adaptive Simpson on `[a, b]` after the IMT-type change of variables
/// `x = a + (b-a) y^m / (y^m + (1-y)^m)`, which flattens algebraic endpoint
/// singularities. Endpoint values are never evaluated.
pub fn imt_simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> QuadResult {
    const M: i32 = 4;
    let len = b - a;
    let mut g = |y: f64| -> f64 {
        if y <= 0.0 || y >= 1.0 {
            return 0.0;
        }
        let p = y.powi(M);
        let q = (1.0 - y).powi(M);
        let den = p + q;
        let dphi = M as f64 * y.powi(M - 1) * (1.0 - y).powi(M - 1) / (den * den);
        let x = if y < 0.5 { a + len * p / den } else { b - len * q / den };
        let v = f(x) * dphi * len;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        g: &mut dyn FnMut(f64) -> f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_mid: f64,
        f_hi: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        evals: &mut u64,
    ) -> (f64, f64, bool) {
        let mid = 0.5 * (lo + hi);
        let lm = 0.5 * (lo + mid);
        let rm = 0.5 * (mid + hi);
        let f_lm = g(lm);
        let f_rm = g(rm);
        *evals += 2;
        let left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lm + f_mid);
        let right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rm + f_hi);
        let diff = left + right - whole;
        if depth == 0 || *evals > 4_000_000 {
            return (left + right + diff / 15.0, diff.abs() / 15.0, false);
        }
        if diff.abs() <= 15.0 * tol {
            return (left + right + diff / 15.0, diff.abs() / 15.0, true);
        }
        let (l, le, lc) = recurse(g, lo, mid, f_lo, f_lm, f_mid, left, 0.5 * tol, depth - 1, evals);
        let (r, re, rc) = recurse(g, mid, hi, f_mid, f_rm, f_hi, right, 0.5 * tol, depth - 1, evals);
        (l + r, le + re, lc && rc)
    }
    let f0 = g(0.0);
    let f1 = g(1.0);
    let fm = g(0.5);
    // A coarse pass sets the absolute tolerance scale.
    let mut evals = 3u64;
    let whole = (f0 + 4.0 * fm + f1) / 6.0;
    let coarse = gauss_legendre(32).apply(0.0, 1.0, &mut g);
    let abs_tol = tol * coarse.abs().max(1e-300);
    let (value, error, converged) = recurse(&mut g, 0.0, 1.0, f0, fm, f1, whole, abs_tol, 48, &mut evals);
    QuadResult {
        value,
        error,
        converged,
        levels: 0,
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(7);
        let v = r.apply(0.0, 2.0, |x| x.powi(13));
        assert!((v - 2f64.powi(14) / 14.0).abs() < 1e-10);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_weight_is_integrated_exactly() {
        // ∫_0^1 x^{-1/2} x^3 dx = 1/3.5
        let v = jacobi_left(6, -0.5, 0.0, 1.0, |x| x.powi(3));
        assert!((v - 1.0 / 3.5).abs() < 1e-14, "{v}");
        // ∫_0^2 (2-x)^{-0.3} dx = 2^{0.7}/0.7
        let v = jacobi_right(4, -0.3, 0.0, 2.0, |_| 1.0);
        assert!((v - 2f64.powf(0.7) / 0.7).abs() < 1e-13, "{v}");
    }

    #[test]
    fn jacobi_with_sum_of_exponents_minus_one() {
        let r = gauss_jacobi(5, -0.5, -0.5);
        // Chebyshev weight: total mass π.
        assert!((r.weights.iter().sum::<f64>() - std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let r = tanh_sinh(|x| x.powf(-0.7), 0.0, 1.0, 1e-12, 10);
        assert!(r.converged);
        assert!((r.value - 1.0 / 0.3).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn sinh_trapezoid_gamma_integral() {
        // ∫ e^{a ℓ - e^ℓ} dℓ = Γ(a)
        let a = 0.37;
        let r = sinh_trapezoid_log(|l| a * l - l.exp(), 0.0, 1e-14);
        let exact = statrs::function::gamma::gamma(a);
        assert!((r.value / exact - 1.0).abs() < 1e-12, "{r:?} {exact}");
    }

    #[test]
    fn imt_simpson_agrees_on_singular_integrand() {
        let r = imt_simpson(|x| x.powf(-0.5) * (1.0 - x).powf(0.2), 0.0, 1.0, 1e-9);
        let exact = statrs::function::beta::beta(0.5, 1.2);
        assert!((r.value / exact - 1.0).abs() < 1e-7, "{r:?} {exact}");
    }
}
