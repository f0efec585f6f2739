//! Weighted double integrals `α_H ∫∫ |r - r'|^{2H-2} F(r, r') dr dr'`,
//! the existence threshold, and second moments of the mild solution.
//!
//! All integrals are taken in rotated coordinates `σ = u + v`, `s = u - v`
//! over a rectangle `[0, a] × [0, b]`. The weight `|s - δ|^β` sits on a
//! line and the smoothing kernel blows up at the corner `σ = 0`; the outer
//! `σ` integral uses tanh-sinh panels split where the inner limits or the
//! weight location change, the inner `s` integral is closed form when `F`
//! depends on `σ` alone and Gauss-Jacobi with graded panels otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fractional_time::HurstParams;
use crate::heat_green::{offset, SpaceTimePoint};
use crate::quadrature::{gauss_legendre, imt_simpson, jacobi_left, tanh_sinh, QuadResult};
use crate::spatial_kernels::{bracket_constants, gaussian_average, KernelFamily, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseRule {
    /// Gauss-type rules: tanh-sinh outer panels, Gauss-Jacobi/Legendre inner panels.
    GaussLegendre,
    /// Adaptive Simpson after an endpoint-flattening substitution, in both variables.
    AdaptiveSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub base_rule: BaseRule,
    /// Number of geometrically graded inner panels on each side of the weight singularity.
    pub panels_per_axis: usize,
    /// Split the outer integral where the integrand has kinks.
    pub singularity_split: bool,
    pub rel_tolerance: f64,
    /// Maximum number of step halvings of the outer rule.
    pub max_refinements: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            base_rule: BaseRule::GaussLegendre,
            panels_per_axis: 10,
            singularity_split: true,
            rel_tolerance: 1e-10,
            max_refinements: 12,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return domain(format!("rel_tolerance must lie in (0, 1), got {}", self.rel_tolerance));
        }
        if !(1..=60).contains(&self.panels_per_axis) {
            return domain(format!("panels_per_axis must lie in 1..=60, got {}", self.panels_per_axis));
        }
        if !(3..=20).contains(&self.max_refinements) {
            return domain(format!("max_refinements must lie in 3..=20, got {}", self.max_refinements));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Set only when `error_estimate <= rel_tolerance * |value|`.
    pub converged: bool,
    pub refinements_used: u32,
}

impl NormResult {
    fn scaled(self, k: f64) -> Self {
        Self {
            value: self.value * k,
            error_estimate: self.error_estimate * k.abs(),
            ..self
        }
    }

    fn zero() -> Self {
        Self {
            value: 0.0,
            error_estimate: 0.0,
            converged: true,
            refinements_used: 0,
        }
    }
}

/// `∫_0^a ∫_0^b |u - v - δ|^β F(u, v) dv du`, optionally restricted to `u + v ≥ σ_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularDoubleIntegral {
    a: f64,
    b: f64,
    delta: f64,
    beta: f64,
    sigma_min: f64,
    corner_power: Option<f64>,
}

impl SingularDoubleIntegral {
    pub fn new(a: f64, b: f64, delta: f64, beta: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return domain(format!("integration rectangle must have positive finite sides, got {a} x {b}"));
        }
        if !(beta > -1.0 && beta.is_finite()) {
            return domain(format!("weight exponent must exceed -1, got {beta}"));
        }
        if !delta.is_finite() {
            return domain("weight offset must be finite");
        }
        Ok(Self {
            a,
            b,
            delta,
            beta,
            sigma_min: 0.0,
            corner_power: None,
        })
    }

    /// `[0, len]²` with the weight on the diagonal.
    pub fn square(len: f64, beta: f64) -> Self {
        debug_assert!(len > 0.0 && beta > -1.0);
        Self {
            a: len,
            b: len,
            delta: 0.0,
            beta,
            sigma_min: 0.0,
            corner_power: None,
        }
    }

    /// Drops the region `u + v < sigma_min`.
    pub fn with_sigma_min(mut self, sigma_min: f64) -> Self {
        self.sigma_min = sigma_min.max(0.0);
        self
    }

    /// Declares that the `σ` integrand behaves like `σ^{c-1}` at `σ = 0`,
    /// enabling a power substitution on the first panel.
    pub fn with_corner_power(mut self, c: f64) -> Self {
        self.corner_power = (c > 0.0 && c < 1.0).then_some(c);
        self
    }

    fn s_range(&self, sigma: f64) -> (f64, f64) {
        ((-sigma).max(sigma - 2.0 * self.b), sigma.min(2.0 * self.a - sigma))
    }

    fn panels(&self, quad: &QuadratureSpec) -> Vec<f64> {
        let lo = self.sigma_min;
        let hi = self.a + self.b;
        let mut pts = vec![lo, hi];
        if quad.singularity_split {
            let d = self.delta;
            for p in [self.a, self.b, d.abs(), 2.0 * self.a - d, 2.0 * self.b + d] {
                if p > lo && p < hi {
                    pts.push(p);
                }
            }
        }
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * hi);
        pts
    }

    /// `∫_{y0}^{y1} |y|^β dy`, accurate also when the interval is short
    /// relative to its distance from 0.
    fn weight_mass(&self, y0: f64, y1: f64) -> f64 {
        if y1 <= y0 {
            return 0.0;
        }
        let beta = self.beta;
        let near = y0.abs().min(y1.abs());
        let straddles = y0 < 0.0 && y1 > 0.0;
        if !straddles && (y1 - y0) < 0.25 * near {
            return gauss_legendre(10).apply(y0, y1, |y| y.abs().powf(beta));
        }
        let p = |y: f64| y.signum() * y.abs().powf(beta + 1.0) / (beta + 1.0);
        p(y1) - p(y0)
    }

    fn outer(&self, mut g: impl FnMut(f64) -> f64, quad: &QuadratureSpec) -> NormResult {
        let pts = self.panels(quad);
        if pts.len() < 2 || pts[0] >= pts[pts.len() - 1] {
            return NormResult::zero();
        }
        let mut value = 0.0;
        let mut error = 0.0;
        let mut all = true;
        let mut levels = 0;
        for (i, w) in pts.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            let r: QuadResult = match (i, self.corner_power) {
                (0, Some(c)) if lo == 0.0 => {
                    // σ = hi x^{1/c}: σ^{c-1} dσ becomes (hi^c / c) dx.
                    let k = 1.0 / c;
                    let f = |x: f64| {
                        let sigma = hi * x.powf(k);
                        if sigma <= 0.0 {
                            return 0.0;
                        }
                        g(sigma) * hi * k * x.powf(k - 1.0)
                    };
                    self.rule(f, 0.0, 1.0, quad)
                }
                _ => self.rule(&mut g, lo, hi, quad),
            };
            value += r.value;
            error += r.error;
            all &= r.converged;
            levels = levels.max(r.levels);
        }
        let converged = all && value.is_finite() && error <= quad.rel_tolerance * value.abs();
        NormResult {
            value,
            error_estimate: error,
            converged,
            refinements_used: levels,
        }
    }

    fn rule(&self, f: impl FnMut(f64) -> f64, lo: f64, hi: f64, quad: &QuadratureSpec) -> QuadResult {
        match quad.base_rule {
            BaseRule::GaussLegendre => tanh_sinh(f, lo, hi, quad.rel_tolerance, quad.max_refinements),
            BaseRule::AdaptiveSimpson => imt_simpson(f, lo, hi, quad.rel_tolerance),
        }
    }

    /// Integral with `F(u, v) = Φ(u + v)`; the inner integral is exact.
    pub fn integrate_sum(&self, phi: &dyn Fn(f64) -> f64, quad: &QuadratureSpec) -> NormResult {
        let delta = self.delta;
        self.outer(
            |sigma| {
                let (lo, hi) = self.s_range(sigma);
                let m = self.weight_mass(lo - delta, hi - delta);
                if m == 0.0 {
                    0.0
                } else {
                    0.5 * phi(sigma) * m
                }
            },
            quad,
        )
    }

    /// Integral for a general `F(u, v)`.
    pub fn integrate_general(&self, f: &dyn Fn(f64, f64) -> f64, quad: &QuadratureSpec) -> NormResult {
        let delta = self.delta;
        let beta = self.beta;
        let n_panels = quad.panels_per_axis;
        let inner = |sigma: f64| -> f64 {
            let (lo, hi) = self.s_range(sigma);
            if hi <= lo {
                return 0.0;
            }
            let fs = |s: f64| f(0.5 * (sigma + s), 0.5 * (sigma - s));
            let mut acc = 0.0;
            match quad.base_rule {
                BaseRule::GaussLegendre => {
                    // Pieces on either side of s = δ, graded toward it.
                    let pieces: [(f64, f64, f64); 2] = [(delta, hi, 1.0), (delta, lo, -1.0)];
                    for (from, to, dir) in pieces {
                        let (from, len) = if dir > 0.0 {
                            (from.max(lo), to - from.max(lo))
                        } else {
                            (from.min(hi), from.min(hi) - to)
                        };
                        if len <= 0.0 {
                            continue;
                        }
                        let gap = (from - delta).abs();
                        acc += graded_piece(len, gap, beta, n_panels, |x| fs(from + dir * x));
                    }
                }
                BaseRule::AdaptiveSimpson => {
                    let w = |s: f64| (s - delta).abs().powf(beta) * fs(s);
                    if delta > lo && delta < hi {
                        acc += imt_simpson(w, lo, delta, quad.rel_tolerance * 0.1).value;
                        acc += imt_simpson(w, delta, hi, quad.rel_tolerance * 0.1).value;
                    } else {
                        acc += imt_simpson(w, lo, hi, quad.rel_tolerance * 0.1).value;
                    }
                }
            }
            0.5 * acc
        };
        self.outer(inner, quad)
    }
}

/// `∫_0^len (gap + x)^β g(x) dx` on panels graded geometrically toward `x = 0`.
fn graded_piece(len: f64, gap: f64, beta: f64, n_panels: usize, mut g: impl FnMut(f64) -> f64) -> f64 {
    let rule = gauss_legendre(12);
    let mut acc = 0.0;
    let mut hi = len;
    for k in 0..n_panels {
        let lo = if k + 1 == n_panels { 0.0 } else { hi * 0.5 };
        if lo == 0.0 && gap == 0.0 {
            acc += jacobi_left(16, beta, 0.0, hi, &mut g);
        } else {
            acc += rule.apply(lo, hi, |x| (gap + x).powf(beta) * g(x));
        }
        hi = lo;
        if hi == 0.0 {
            break;
        }
    }
    acc
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("time horizon must be positive and finite, got {t}"));
    }
    Ok(())
}

/// `α_H ∫_0^t∫_0^t F(u, v) |u - v|^{2H-2} du dv`.
pub fn weighted_double_integral(
    f: &dyn Fn(f64, f64) -> f64,
    hp: &HurstParams,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<NormResult> {
    check_horizon(t)?;
    quad.validate()?;
    let engine = SingularDoubleIntegral::square(t, hp.weight_exponent());
    Ok(engine.integrate_general(f, quad).scaled(hp.alpha_h))
}

/// Verdict of the existence criterion `H > max{(d - α_f)/4, 1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistenceVerdict {
    pub hurst: f64,
    /// `(d - α_f)/4`, before clamping to the standing assumption `H > 1/2`.
    pub critical_value: f64,
    /// `max{(d - α_f)/4, 1/2}`.
    pub threshold: f64,
    pub admissible: bool,
}

pub fn existence_threshold(spec: &KernelSpec) -> f64 {
    ((spec.dim as f64 - spec.alpha_f) / 4.0).max(0.5)
}

pub fn existence_check(spec: &KernelSpec, hurst: f64) -> Result<ExistenceVerdict> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return domain(format!("Hurst index must lie in (1/2, 1), got {hurst}"));
    }
    let threshold = existence_threshold(spec);
    Ok(ExistenceVerdict {
        hurst,
        critical_value: (spec.dim as f64 - spec.alpha_f) / 4.0,
        threshold,
        admissible: hurst > threshold,
    })
}

fn require_existence(spec: &KernelSpec, hp: &HurstParams) -> Result<()> {
    let v = existence_check(spec, hp.hurst)?;
    if !v.admissible {
        return Err(Error::Threshold {
            hurst: hp.hurst,
            threshold: v.threshold,
            condition: "H > max{(d - alpha_f)/4, 1/2}",
        });
    }
    Ok(())
}

/// Exponent of the leading power law `N(ε) ~ ε^γ` of the truncated norm,
/// `γ = 2H - (d - α_f)/2`.
pub fn corner_exponent(spec: &KernelSpec, hp: &HurstParams) -> f64 {
    2.0 * hp.hurst - spec.corner_exponent()
}

fn power_law_norm(coef: f64, p: f64, hp: &HurstParams, t: f64, sigma_min: f64, quad: &QuadratureSpec) -> NormResult {
    let gamma = hp.weight_exponent() + 2.0 - p;
    let mut engine = SingularDoubleIntegral::square(t, hp.weight_exponent()).with_sigma_min(sigma_min);
    if sigma_min == 0.0 {
        engine = engine.with_corner_power(gamma);
    }
    engine.integrate_sum(&|s| s.powf(-p), quad).scaled(coef * hp.alpha_h)
}

/// `‖g_{tx}‖²` for space-time white noise in dimension `d`:
/// `α_H ∫∫ |r - r'|^{2H-2} (4π(2t - r - r'))^{-d/2} dr dr'`.
pub fn norm_g_white(dim: usize, hp: &HurstParams, t: f64, quad: &QuadratureSpec) -> Result<NormResult> {
    let spec = KernelSpec::white(dim)?;
    check_horizon(t)?;
    quad.validate()?;
    require_existence(&spec, hp)?;
    let d = dim as f64;
    Ok(power_law_norm((4.0 * std::f64::consts::PI).powf(-d / 2.0), d / 2.0, hp, t, 0.0, quad))
}

/// `‖g_{tx}‖²` for a colored noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColoredNorm {
    /// White noise and Riesz kernels, where `I_f` is an exact power law.
    Exact(NormResult),
    /// Power-law bracket for bounded kernels. `lower` integrates the lower
    /// constant only where it is certified, so both ends are rigorous.
    Bracket { lower: NormResult, upper: NormResult },
}

pub fn norm_g_colored(spec: &KernelSpec, hp: &HurstParams, t: f64, quad: &QuadratureSpec) -> Result<ColoredNorm> {
    check_horizon(t)?;
    quad.validate()?;
    require_existence(spec, hp)?;
    let consts = bracket_constants(spec, t);
    let p = consts.exponent;
    match spec.family {
        KernelFamily::WhiteNoise | KernelFamily::Riesz => {
            Ok(ColoredNorm::Exact(power_law_norm(consts.upper, p, hp, t, 0.0, quad)))
        }
        _ => {
            let upper = power_law_norm(consts.upper, p, hp, t, 0.0, quad);
            let lower = if consts.lower_valid_from >= 2.0 * t {
                NormResult::zero()
            } else {
                power_law_norm(consts.lower, p, hp, t, consts.lower_valid_from, quad)
            };
            Ok(ColoredNorm::Bracket { lower, upper })
        }
    }
}

/// `‖g_{tx}‖²` with the exact `I_f` (mixture quadrature for bounded
/// kernels), restricted to `2t - r - r' ≥ sigma_min`.
pub fn norm_g_exact(
    spec: &KernelSpec,
    hp: &HurstParams,
    t: f64,
    sigma_min: f64,
    quad: &QuadratureSpec,
) -> Result<NormResult> {
    check_horizon(t)?;
    quad.validate()?;
    if !(sigma_min >= 0.0) {
        return domain(format!("truncation must be non-negative, got {sigma_min}"));
    }
    let zero = vec![0.0; spec.dim];
    match spec.family {
        KernelFamily::WhiteNoise | KernelFamily::Riesz => {
            let consts = bracket_constants(spec, t);
            Ok(power_law_norm(consts.upper, consts.exponent, hp, t, sigma_min, quad))
        }
        _ => {
            let engine = SingularDoubleIntegral::square(t, hp.weight_exponent()).with_sigma_min(sigma_min);
            let phi = |s: f64| gaussian_average(spec, s, &zero).unwrap_or(f64::NAN);
            Ok(engine.integrate_sum(&phi, quad).scaled(hp.alpha_h))
        }
    }
}

/// `E u(t1, x1) u(t2, x2) = α_H ∫_0^{t1}∫_0^{t2} |u - v - (t1 - t2)|^{2H-2} J_f(u, v, x1, x2) dv du`
/// with `J_f = E f(x1 - x2 + U)`, `U ~ N(0, 2(u + v) I_d)`.
pub fn covariance_solution(
    spec: &KernelSpec,
    hp: &HurstParams,
    p1: &SpaceTimePoint,
    p2: &SpaceTimePoint,
    quad: &QuadratureSpec,
) -> Result<NormResult> {
    quad.validate()?;
    if p1.dim() != spec.dim || p2.dim() != spec.dim {
        return domain(format!("points must have dimension {}", spec.dim));
    }
    require_existence(spec, hp)?;
    let w = offset(&p1.x, &p2.x);
    let engine = SingularDoubleIntegral::new(p1.t, p2.t, p1.t - p2.t, hp.weight_exponent())?;
    let engine = if w.iter().all(|v| *v == 0.0) && p1.t == p2.t {
        engine.with_corner_power(corner_exponent(spec, hp))
    } else {
        engine
    };
    let phi = |s: f64| gaussian_average(spec, s, &w).unwrap_or(f64::NAN);
    Ok(engine.integrate_sum(&phi, quad).scaled(hp.alpha_h))
}

/// Truncated norms `N(ε)` for each `ε` in `truncations`.
pub fn divergence_scan(
    spec: &KernelSpec,
    hp: &HurstParams,
    t: f64,
    truncations: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<NormResult>> {
    for &e in truncations {
        if !(e > 0.0 && e.is_finite()) {
            return domain(format!("truncations must be positive, got {e}"));
        }
    }
    truncations.iter().map(|&e| norm_g_exact(spec, hp, t, e, quad)).collect()
}

/// Summary of a truncation scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanAnalysis {
    /// `γ = 2H - (d - α_f)/2`; the scan should converge iff `γ > 0` (for singular kernels).
    pub exponent: f64,
    /// `N(ε_{k+1}) - N(ε_k)`.
    pub increments: Vec<f64>,
    /// Ratios of successive increments.
    pub increment_ratios: Vec<f64>,
    /// Increment ratios predicted by a pure power law `A ε^γ + B`.
    pub predicted_ratios: Vec<f64>,
    /// `|N_last - N_prev| / |N_last|`.
    pub final_relative_change: f64,
}

pub fn analyze_scan(exponent: f64, truncations: &[f64], values: &[f64]) -> Result<ScanAnalysis> {
    if truncations.len() != values.len() || values.len() < 2 {
        return domain("scan analysis needs at least two matching truncations and values");
    }
    let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let increment_ratios = increments.windows(2).map(|w| w[1] / w[0]).collect();
    // For N(ε) = A ε^γ + B: ΔN_k ∝ ε_k^γ - ε_{k+1}^γ.
    let step = |k: usize| truncations[k].powf(exponent) - truncations[k + 1].powf(exponent);
    let predicted_ratios = (0..increments.len().saturating_sub(1)).map(|k| step(k + 1) / step(k)).collect();
    let n = values.len();
    Ok(ScanAnalysis {
        exponent,
        increments,
        increment_ratios,
        predicted_ratios,
        final_relative_change: (values[n - 1] - values[n - 2]).abs() / values[n - 1].abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional_time::derive_hurst_params;

    fn hp(h: f64) -> HurstParams {
        derive_hurst_params(h).unwrap()
    }

    #[test]
    fn weighted_integral_polynomial_fixture() {
        // α_H ∫∫ uv |u-v|^{-1/2} = 2/7 at H = 3/4.
        let q = QuadratureSpec::default();
        let r = weighted_double_integral(&|u, v| u * v, &hp(0.75), 1.0, &q).unwrap();
        assert!(r.converged);
        assert!((r.value - 2.0 / 7.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn weighted_integral_of_one_is_fbm_variance() {
        let q = QuadratureSpec::default();
        for h in [0.55, 0.7, 0.95] {
            let r = weighted_double_integral(&|_, _| 1.0, &hp(h), 1.7, &q).unwrap();
            assert!((r.value - 1.7f64.powf(2.0 * h)).abs() < 1e-9, "{h}: {r:?}");
        }
    }

    #[test]
    fn simpson_base_rule_cross_checks() {
        let q = QuadratureSpec {
            base_rule: BaseRule::AdaptiveSimpson,
            rel_tolerance: 1e-8,
            ..QuadratureSpec::default()
        };
        let r = weighted_double_integral(&|u, v| u * v, &hp(0.75), 1.0, &q).unwrap();
        assert!((r.value - 2.0 / 7.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn white_norm_fixture() {
        // d = 1, H = 0.9, t = 1 (mpmath).
        let r = norm_g_white(1, &hp(0.9), 1.0, &QuadratureSpec::default()).unwrap();
        assert!(r.converged);
        assert!((r.value / 0.317822203387209612 - 1.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn riesz_norm_fixture() {
        let spec = KernelSpec::riesz(1.0, 4).unwrap();
        match norm_g_colored(&spec, &hp(0.9), 1.0, &QuadratureSpec::default()).unwrap() {
            ColoredNorm::Exact(r) => {
                assert!(r.converged);
                assert!((r.value / 29.1733758609234237 - 1.0).abs() < 1e-9, "{r:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threshold_violations_error() {
        let q = QuadratureSpec::default();
        assert!(norm_g_white(2, &hp(0.5 + 1e-3), 1.0, &q).is_ok());
        assert!(matches!(norm_g_white(3, &hp(0.74), 1.0, &q), Err(Error::Threshold { .. })));
        assert!(norm_g_white(3, &hp(0.76), 1.0, &q).is_ok());
        assert!(matches!(norm_g_white(4, &hp(0.99), 1.0, &q), Err(Error::Threshold { .. })));
    }

    #[test]
    fn existence_verdicts() {
        let riesz = KernelSpec::riesz(1.0, 3).unwrap();
        assert_eq!(existence_threshold(&riesz), 0.5);
        assert!(existence_check(&riesz, 0.51).unwrap().admissible);
        let heat = KernelSpec::heat(1.0, 3).unwrap();
        assert_eq!(existence_threshold(&heat), 0.75);
        assert!(!existence_check(&heat, 0.75).unwrap().admissible);
        let p = KernelSpec::poisson(1.0, 3).unwrap();
        assert_eq!(existence_threshold(&p), 1.0);
        assert!(!existence_check(&p, 0.99).unwrap().admissible);
        assert!(existence_check(&p, 0.5).is_err());
        assert!(existence_check(&p, 1.0).is_err());
    }

    #[test]
    fn bracket_contains_exact_norm() {
        let q = QuadratureSpec::default();
        for spec in [
            KernelSpec::heat(0.5, 2).unwrap(),
            KernelSpec::bessel(1.0, 2).unwrap(),
            KernelSpec::poisson(0.5, 1).unwrap(),
        ] {
            let h = hp(0.8);
            let exact = norm_g_exact(&spec, &h, 1.0, 0.0, &q).unwrap();
            match norm_g_colored(&spec, &h, 1.0, &q).unwrap() {
                ColoredNorm::Bracket { lower, upper } => {
                    assert!(lower.value <= exact.value && exact.value <= upper.value, "{spec:?} {lower:?} {exact:?} {upper:?}");
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn covariance_on_diagonal_equals_norm() {
        let q = QuadratureSpec::default();
        let spec = KernelSpec::riesz(1.0, 2).unwrap();
        let h = hp(0.8);
        let p = SpaceTimePoint::new(0.7, vec![0.3, 0.1]).unwrap();
        let c = covariance_solution(&spec, &h, &p, &p, &q).unwrap();
        let n = norm_g_exact(&spec, &h, 0.7, 0.0, &q).unwrap();
        assert!((c.value / n.value - 1.0).abs() < 1e-9, "{c:?} {n:?}");
    }

    #[test]
    fn white_covariance_in_one_dimension_fixture() {
        // α_H ∫_0^{t1}∫_0^{t2} |u - v - δ|^{2H-2} G(u+v, w) dv du with the
        // weight removed by y = |v - c|^{2H-1}/(2H-1) on each side (mpmath, 20 digits).
        let h = hp(0.7);
        let (t1, t2, w) = (0.8, 0.5, 0.4);
        let spec = KernelSpec::white(1).unwrap();
        let p1 = SpaceTimePoint::new(t1, vec![w]).unwrap();
        let p2 = SpaceTimePoint::new(t2, vec![0.0]).unwrap();
        let c = covariance_solution(&spec, &h, &p1, &p2, &QuadratureSpec::default()).unwrap();
        assert!(c.converged);
        assert!((c.value / 0.15327530706690469046 - 1.0).abs() < 1e-10, "{c:?}");
    }

    #[test]
    fn covariance_is_symmetric() {
        let q = QuadratureSpec::default();
        let spec = KernelSpec::heat(0.3, 1).unwrap();
        let h = hp(0.65);
        let p1 = SpaceTimePoint::new(0.9, vec![0.2]).unwrap();
        let p2 = SpaceTimePoint::new(0.4, vec![-0.3]).unwrap();
        let a = covariance_solution(&spec, &h, &p1, &p2, &q).unwrap();
        let b = covariance_solution(&spec, &h, &p2, &p1, &q).unwrap();
        assert!((a.value - b.value).abs() < 1e-10 * a.value.abs(), "{a:?} {b:?}");
    }

    #[test]
    fn scan_predictions_for_pure_power_law() {
        let eps = [0.1, 0.05, 0.025, 0.0125];
        let gamma = -0.3;
        let vals: Vec<f64> = eps.iter().map(|e: &f64| 2.0 * e.powf(gamma) + 1.0).collect();
        let a = analyze_scan(gamma, &eps, &vals).unwrap();
        for (r, p) in a.increment_ratios.iter().zip(&a.predicted_ratios) {
            assert!((r / p - 1.0).abs() < 1e-12);
            assert!((p - 2f64.powf(0.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_norm_increases_toward_full_norm() {
        let q = QuadratureSpec::default();
        let spec = KernelSpec::riesz(1.0, 2).unwrap();
        let h = hp(0.8);
        let full = norm_g_exact(&spec, &h, 1.0, 0.0, &q).unwrap().value;
        let scan = divergence_scan(&spec, &h, 1.0, &[0.4, 0.1, 0.01, 1e-4], &q).unwrap();
        let mut prev = 0.0;
        for r in &scan {
            assert!(r.value > prev && r.value < full);
            prev = r.value;
        }
    }
}
