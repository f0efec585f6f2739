//! Temporal (fractional Brownian) machinery for `H ∈ (1/2, 1)`.
//!
//! Covers the fBm covariance `R_H`, the square-integrable kernel `K_H`
//! with `R_H(t,s) = ∫_0^{t∧s} K_H(t,u) K_H(s,u) du`, the right-sided
//! Riemann–Liouville integral, the transfer operator `K*_H` expressed
//! through that integral, the Fourier transform restricted to an
//! interval, and the weighted spectral identity
//! `∫∫ φ(u)|u-v|^{-(1-α)}ψ(v) = q_α ∫ |τ|^{-α} F φ · conj(F ψ) dτ`.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{domain, Result};
use crate::norms_existence::{QuadratureSpec, SingularDoubleIntegral};
use crate::quadrature::{gauss_legendre, jacobi_left, tanh_sinh, QuadResult};

/// Hurst index and the temporal constants derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstParams {
    pub hurst: f64,
    /// `α_H = H(2H-1)`.
    pub alpha_h: f64,
    /// `c_H = Γ(H-1/2) / (2^{2(1-H)} π^{1/2} Γ(1-H))`.
    pub c_h: f64,
    /// Normalizing constant of `K_H`.
    pub c_star_h: f64,
}

impl HurstParams {
    pub fn new(hurst: f64) -> Result<Self> {
        derive_hurst_params(hurst)
    }

    /// `2H - 2`, the exponent of the temporal weight `|u-v|^{2H-2}`.
    pub fn weight_exponent(&self) -> f64 {
        2.0 * self.hurst - 2.0
    }
}

/// Computes `α_H`, `c_H` and `c*_H`. Gamma ratios go through `ln Γ`.
pub fn derive_hurst_params(hurst: f64) -> Result<HurstParams> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return domain(format!("Hurst index must lie in (1/2, 1), got {hurst}"));
    }
    let h = hurst;
    let alpha_h = h * (2.0 * h - 1.0);
    let ln_c_h = ln_gamma(h - 0.5)
        - ln_gamma(1.0 - h)
        - 2.0 * (1.0 - h) * std::f64::consts::LN_2
        - 0.5 * PI.ln();
    let ln_c_star_sq = alpha_h.ln() + ln_gamma(1.5 - h) - ln_gamma(2.0 - 2.0 * h) - ln_gamma(h - 0.5);
    Ok(HurstParams {
        hurst,
        alpha_h,
        c_h: ln_c_h.exp(),
        c_star_h: (0.5 * ln_c_star_sq).exp(),
    })
}

/// `R_H(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(hp: &HurstParams, t: f64, s: f64) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return domain(format!("fBm covariance needs t, s >= 0, got ({t}, {s})"));
    }
    let e = 2.0 * hp.hurst;
    Ok(0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

/// A value paired with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Piecewise-linear function on a strictly increasing grid inside `[0, horizon]`,
/// identically zero outside the grid span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    horizon: f64,
}

impl SampledFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self> {
        if grid.len() != values.len() {
            return domain(format!(
                "grid has {} points but {} values were given",
                grid.len(),
                values.len()
            ));
        }
        if grid.len() < 2 {
            return domain("a sampled function needs at least two grid points");
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return domain(format!("horizon must be positive and finite, got {horizon}"));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return domain("grid and values must be finite");
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return domain("grid must be strictly increasing");
        }
        if grid[0] < 0.0 || grid[grid.len() - 1] > horizon {
            return domain(format!("grid must lie within [0, {horizon}]"));
        }
        Ok(Self { grid, values, horizon })
    }

    /// `1_{[a,b]}` represented on the two-point grid `{a, b}`.
    pub fn indicator(a: f64, b: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![1.0, 1.0], horizon)
    }

    /// Samples `f` at `n + 1` equispaced points of `[a, b]`.
    pub fn from_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize, horizon: f64) -> Result<Self> {
        let n = n.max(1);
        let grid: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let values = grid.iter().map(|&x| f(x)).collect();
        Self::new(grid, values, horizon)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Linear interpolation; zero outside the span.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.span();
        if x < lo || x > hi {
            return 0.0;
        }
        let i = match self.grid.partition_point(|&g| g <= x) {
            0 => 0,
            k if k >= self.grid.len() => self.grid.len() - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Linear pieces `(x0, x1, y0, y1)` clipped to `[a, b]`.
    fn pieces(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.grid.windows(2).zip(self.values.windows(2)).filter_map(move |(g, v)| {
            let lo = g[0].max(a);
            let hi = g[1].min(b);
            if hi <= lo {
                return None;
            }
            let slope = (v[1] - v[0]) / (g[1] - g[0]);
            Some((lo, hi, v[0] + slope * (lo - g[0]), v[0] + slope * (hi - g[0])))
        })
    }

    /// `|φ(a)| + |φ(b)| + TV(φ on [a,b])`, so that `|F_{a,b}φ(τ)| ≤ bound / |τ|`.
    fn fourier_decay_bound(&self, a: f64, b: f64) -> f64 {
        let tv: f64 = self.pieces(a, b).map(|(_, _, y0, y1)| (y1 - y0).abs()).sum();
        self.eval(a).abs() + self.eval(b).abs() + tv
    }
}

/// Right-sided Riemann–Liouville integral
/// `(I^α_{T-} f)(t) = Γ(α)^{-1} ∫_t^T (u-t)^{α-1} f(u) du`,
/// exact for the piecewise-linear interpolant of `f`.
pub fn fractional_integral_right(f: &SampledFunction, alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("fractional order must lie in (0, 1), got {alpha}"));
    }
    if !(t >= 0.0 && t < f.horizon) {
        return domain(format!("evaluation point must lie in [0, {}), got {t}", f.horizon));
    }
    let mut acc = 0.0;
    for (lo, hi, y0, y1) in f.pieces(t, f.horizon) {
        // f = c0 + c1 (u - t) on this piece.
        let c1 = (y1 - y0) / (hi - lo);
        let c0 = y0 - c1 * (lo - t);
        let (a, b) = (lo - t, hi - t);
        acc += c0 * (b.powf(alpha) - a.powf(alpha)) / alpha
            + c1 * (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / (alpha + 1.0);
    }
    Ok(acc / gamma(alpha))
}

/// `∫_lo^hi (u-s)^{a-1} g(u) du` for `s ≤ lo`, with `a ∈ (0,1)`.
///
/// The substitution `y = (u-s)^a` removes the endpoint singularity; the
/// range is graded geometrically relative to `s` so that features of `g`
/// at the scale of `s` are resolved.
fn singular_right_integral(s: f64, lo: f64, hi: f64, a: f64, order: usize, g: &dyn Fn(f64) -> f64) -> f64 {
    let rule = gauss_legendre(order);
    let mut cuts = vec![lo];
    let scale = s.max(f64::MIN_POSITIVE);
    let mut k = scale / 16.0;
    while s + k < hi {
        if s + k > lo {
            cuts.push(s + k);
        }
        k *= 4.0;
    }
    cuts.push(hi);
    let inv = 1.0 / a;
    cuts.windows(2)
        .map(|w| {
            let y0 = (w[0] - s).powf(a);
            let y1 = (w[1] - s).powf(a);
            rule.apply(y0, y1, |y| g(s + y.powf(inv))) * inv
        })
        .sum()
}

/// `K_H(t,s) = c*_H s^{1/2-H} ∫_s^t (u-s)^{H-3/2} u^{H-1/2} du` for `0 < s < t`.
///
/// The error estimate compares 16- and 32-point rules.
pub fn kernel_k_h(hp: &HurstParams, t: f64, s: f64) -> Result<Estimate> {
    if !(s > 0.0 && s < t && t.is_finite()) {
        return domain(format!("K_H(t, s) needs 0 < s < t, got t = {t}, s = {s}"));
    }
    let a = hp.hurst - 0.5;
    let g = |u: f64| u.powf(a);
    let coarse = singular_right_integral(s, s, t, a, 16, &g);
    let fine = singular_right_integral(s, s, t, a, 32, &g);
    let pre = hp.c_star_h * s.powf(-a);
    Ok(Estimate {
        value: pre * fine,
        error: pre * (fine - coarse).abs(),
    })
}

/// `K_H(t,s)` extended by zero for `s ≥ t`; used inside outer quadratures.
fn kernel_or_zero(hp: &HurstParams, t: f64, s: f64) -> f64 {
    if s >= t || s <= 0.0 {
        0.0
    } else {
        kernel_k_h(hp, t, s).map(|e| e.value).unwrap_or(0.0)
    }
}

/// `∫_0^{t∧s} K_H(t,u) K_H(s,u) du`, the Volterra factorization of `R_H`.
pub fn kernel_reproduction(hp: &HurstParams, t: f64, s: f64) -> Result<QuadResult> {
    if !(t > 0.0 && s > 0.0) {
        return domain("kernel reproduction needs t, s > 0");
    }
    let m = t.min(s);
    Ok(tanh_sinh(|u| kernel_or_zero(hp, t, u) * kernel_or_zero(hp, s, u), 0.0, m, 1e-10, 9))
}

/// `(K*_H φ)(s) = c*_H Γ(H-1/2) s^{-(H-1/2)} I^{H-1/2}_{T-}(u^{H-1/2} φ(u))(s)`.
///
/// The factor `u^{H-1/2}` is kept exact; only `φ` is interpolated.
pub fn transfer_operator(phi: &SampledFunction, hp: &HurstParams, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < phi.horizon) {
        return domain(format!("transfer operator needs 0 < s < {}, got {s}", phi.horizon));
    }
    let a = hp.hurst - 0.5;
    let mut acc = 0.0;
    for (lo, hi, y0, y1) in phi.pieces(s, phi.horizon) {
        let slope = (y1 - y0) / (hi - lo);
        let g = |u: f64| u.powf(a) * (y0 + slope * (u - lo));
        acc += singular_right_integral(s, lo, hi, a, 16, &g);
    }
    // c* Γ(a) s^{-a} · Γ(a)^{-1} ∫ ...
    Ok(hp.c_star_h * s.powf(-a) * acc)
}

/// `∫_0^T |(K*_H φ)(s)|² ds`, the squared `L²(0,T)` norm of the transferred function.
pub fn transfer_norm_sq(phi: &SampledFunction, hp: &HurstParams) -> Result<QuadResult> {
    let (_, hi) = phi.span();
    let upper = hi.min(phi.horizon);
    let mut err = None;
    let r = tanh_sinh(
        |s| match transfer_operator(phi, hp, s) {
            Ok(v) => v * v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        upper,
        1e-10,
        9,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// `E0(z) = ∫_0^1 e^{-izy} dy` and `E1(z) = ∫_0^1 y e^{-izy} dy`.
fn fourier_moments(z: f64) -> (Complex<f64>, Complex<f64>) {
    if z.abs() < 0.25 {
        // Taylor series: Σ (-iz)^k / k! · {1/(k+1), 1/(k+2)}.
        let mut e0 = Complex::new(0.0, 0.0);
        let mut e1 = Complex::new(0.0, 0.0);
        let mut pow = Complex::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 0..20 {
            let kf = k as f64;
            if k > 0 {
                fact *= kf;
                pow *= Complex::new(0.0, -z);
            }
            e0 += pow / (fact * (kf + 1.0));
            e1 += pow / (fact * (kf + 2.0));
        }
        (e0, e1)
    } else {
        let c = Complex::new(0.0, -z);
        let ec = c.exp();
        let e0 = (ec - 1.0) / c;
        let e1 = ec / c - (ec - 1.0) / (c * c);
        (e0, e1)
    }
}

/// `F_{a,b}φ(τ) = ∫_a^b e^{-iτt} φ(t) dt`, exact for the piecewise-linear
/// interpolant (no oscillation error at large `τ`).
pub fn restricted_fourier(phi: &SampledFunction, a: f64, b: f64, tau: f64) -> Result<Complex<f64>> {
    if !(b > a) {
        return domain(format!("restricted Fourier transform needs a < b, got [{a}, {b}]"));
    }
    let (lo, hi) = phi.span();
    if a < lo || b > hi {
        return domain(format!("[{a}, {b}] is not inside the grid span [{lo}, {hi}]"));
    }
    Ok(fourier_pieces(phi, a, b, tau))
}

fn fourier_pieces(phi: &SampledFunction, a: f64, b: f64, tau: f64) -> Complex<f64> {
    phi.pieces(a, b)
        .map(|(x0, x1, y0, y1)| {
            let h = x1 - x0;
            let (e0, e1) = fourier_moments(tau * h);
            let phase = Complex::new(0.0, -tau * x0).exp();
            phase * h * (e0 * y0 + e1 * (y1 - y0))
        })
        .sum()
}

/// `q_α = Γ(α/2) / (2^{1-α} π^{1/2} Γ((1-α)/2))`.
pub fn q_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("q_α needs α in (0, 1), got {alpha}"));
    }
    let ln = ln_gamma(alpha / 2.0)
        - ln_gamma((1.0 - alpha) / 2.0)
        - (1.0 - alpha) * std::f64::consts::LN_2
        - 0.5 * PI.ln();
    Ok(ln.exp())
}

/// Both sides of the weighted spectral pairing on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    /// `∫_a^b∫_a^b φ(u) |u-v|^{-(1-α)} ψ(v) dv du`.
    pub lhs: f64,
    pub lhs_error: f64,
    /// `q_α ∫_{|τ| ≤ τ_max} |τ|^{-α} F φ conj(F ψ) dτ`.
    pub rhs: f64,
    /// Bound on the neglected frequency tail `|τ| > τ_max`.
    pub rhs_tail_bound: f64,
    pub tau_max: f64,
    /// False when the tail bound exceeds its budget at the largest allowed `τ_max`.
    pub converged: bool,
}

const PAIRING_REL_TOL: f64 = 1e-5;
const PAIRING_TAU_CAP: f64 = 2e6;

/// Evaluates both sides of
/// `∫∫ φ(u)|u-v|^{-(1-α)}ψ(v) dv du = q_α ∫ |τ|^{-α} F_{a,b}φ conj(F_{a,b}ψ) dτ`.
pub fn lemma_a1_pairing(
    phi: &SampledFunction,
    psi: &SampledFunction,
    a: f64,
    b: f64,
    alpha: f64,
) -> Result<PairingResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("pairing exponent must lie in (0, 1), got {alpha}"));
    }
    if !(b > a) {
        return domain(format!("pairing needs a < b, got [{a}, {b}]"));
    }
    for f in [phi, psi] {
        let (lo, hi) = f.span();
        if a < lo || b > hi {
            return domain(format!("[{a}, {b}] is not inside the grid span [{lo}, {hi}]"));
        }
    }
    let len = b - a;
    let quad = QuadratureSpec {
        rel_tolerance: 1e-12,
        ..QuadratureSpec::default()
    };
    let lhs = SingularDoubleIntegral::square(len, alpha - 1.0).integrate_general(
        &|u, v| phi.eval(a + u) * psi.eval(a + v),
        &quad,
    );

    let q = q_alpha(alpha)?;
    let decay = phi.fourier_decay_bound(a, b) * psi.fourier_decay_bound(a, b);
    // Tail of 2 q ∫_{τmax}^∞ τ^{-α} decay/τ² dτ below 10% of the budget.
    let budget = 0.1 * PAIRING_REL_TOL * lhs.value.abs().max(1e-300);
    let mut tau_max = (2.0 * q * decay / ((1.0 + alpha) * budget)).powf(1.0 / (1.0 + alpha));
    let converged = tau_max <= PAIRING_TAU_CAP;
    tau_max = tau_max.clamp(1.0, PAIRING_TAU_CAP);
    let tail = 2.0 * q * decay * tau_max.powf(-1.0 - alpha) / (1.0 + alpha);

    let integrand = |tau: f64| -> f64 {
        let fa = fourier_pieces(phi, a, b, tau);
        let fb = fourier_pieces(psi, a, b, tau);
        (fa * fb.conj()).re
    };
    // Singular panel [0, τ0] with the weight τ^{-α} integrated exactly.
    let tau0 = (1.0 / len).min(tau_max);
    let mut acc = jacobi_left(24, -alpha, 0.0, tau0, integrand);
    let width = (1.0 / len).min(1.0);
    let rule = gauss_legendre(12);
    let mut lo = tau0;
    while lo < tau_max {
        let hi = (lo + width).min(tau_max);
        acc += rule.apply(lo, hi, |tau| tau.powf(-alpha) * integrand(tau));
        lo = hi;
    }
    Ok(PairingResult {
        lhs: lhs.value,
        lhs_error: lhs.error_estimate,
        rhs: 2.0 * q * acc,
        rhs_tail_bound: tail,
        tau_max,
        converged: converged && lhs.converged,
    })
}
