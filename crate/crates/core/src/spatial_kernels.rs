//! Spatial covariance kernels: Riesz, Bessel, heat and Poisson potentials,
//! plus spatial white noise as a degenerate family.
//!
//! Every non-white kernel is a Gaussian scale mixture
//! `f(x) = ∫_0^∞ m(λ) e^{-λ|x|²} dλ`, so the Gaussian smoothing
//! `E f(w + U)` with `U ~ N(0, 2σ I_d)` reduces to one integral over the
//! Laplace variable with the closed-form factor
//! `E e^{-λ|w+U|²} = (1 + 4λσ)^{-d/2} exp(-λ|w|² / (1 + 4λσ))`.
//! That factor is the moment generating function of the decomposition
//! `|w+U|² / 2σ = W_{d-1} + S²` (central chi-square plus a shifted normal
//! square), evaluated at `2λσ`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_li, ln_gamma};

use crate::error::{domain, Error, Result};
use crate::gaussian_oracles::chi2_neg_moment;
use crate::quadrature::{gauss_legendre, sinh_trapezoid_log, softplus};

const MIXTURE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    WhiteNoise,
    Riesz,
    Bessel,
    Heat,
    Poisson,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::WhiteNoise,
        KernelFamily::Riesz,
        KernelFamily::Bessel,
        KernelFamily::Heat,
        KernelFamily::Poisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::WhiteNoise => "white",
            KernelFamily::Riesz => "riesz",
            KernelFamily::Bessel => "bessel",
            KernelFamily::Heat => "heat",
            KernelFamily::Poisson => "poisson",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "white" | "white_noise" | "white-noise" | "whitenoise" | "delta" => Ok(KernelFamily::WhiteNoise),
            "riesz" => Ok(KernelFamily::Riesz),
            "bessel" => Ok(KernelFamily::Bessel),
            "heat" | "gaussian" => Ok(KernelFamily::Heat),
            "poisson" => Ok(KernelFamily::Poisson),
            other => domain(format!(
                "unknown kernel family '{other}' (expected one of white, riesz, bessel, heat, poisson)"
            )),
        }
    }
}

/// A validated spatial covariance kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Family parameter (order for Riesz/Bessel, scale for heat/Poisson; unused for white noise).
    pub alpha: f64,
    pub dim: usize,
    /// Multiplicative constant of the kernel (1 for white noise).
    pub constant: f64,
    /// Existence exponent: the solution exists iff `H > (d - α_f)/4`.
    pub alpha_f: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, alpha: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("spatial dimension must be at least 1");
        }
        let d = dim as f64;
        if family != KernelFamily::WhiteNoise && !(alpha.is_finite() && alpha > 0.0) {
            return domain(format!("{family} kernel needs alpha > 0, got {alpha}"));
        }
        let (constant, alpha_f) = match family {
            KernelFamily::WhiteNoise => (1.0, 0.0),
            KernelFamily::Riesz => {
                if alpha >= d {
                    return domain(format!("riesz kernel needs 0 < alpha < d = {dim}, got alpha = {alpha}"));
                }
                (riesz_constant(alpha, d), alpha)
            }
            KernelFamily::Bessel => {
                let ln = 0.5 * alpha * (4.0 * PI).ln() + ln_gamma(alpha / 2.0);
                (ln.exp(), 0.0)
            }
            KernelFamily::Heat => ((4.0 * PI * alpha).powf(-d / 2.0), 0.0),
            KernelFamily::Poisson => {
                let ln = -(d + 1.0) / 2.0 * PI.ln() + ln_gamma((d + 1.0) / 2.0);
                (ln.exp() * alpha, -1.0)
            }
        };
        let alpha = if family == KernelFamily::WhiteNoise { 0.0 } else { alpha };
        Ok(Self {
            family,
            alpha,
            dim,
            constant,
            alpha_f,
        })
    }

    pub fn white(dim: usize) -> Result<Self> {
        Self::new(KernelFamily::WhiteNoise, 0.0, dim)
    }

    pub fn riesz(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Riesz, alpha, dim)
    }

    pub fn bessel(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Bessel, alpha, dim)
    }

    pub fn heat(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Heat, alpha, dim)
    }

    pub fn poisson(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Poisson, alpha, dim)
    }

    fn d(&self) -> f64 {
        self.dim as f64
    }

    /// Exponent `(d - α_f)/2` of the power law `(2t-s-r)^{-(d-α_f)/2}`.
    pub fn corner_exponent(&self) -> f64 {
        (self.d() - self.alpha_f) / 2.0
    }

    /// Value at radius `r = |x|`.
    pub fn radial_eval(&self, r: f64) -> Result<f64> {
        let d = self.d();
        let a = self.alpha;
        match self.family {
            KernelFamily::WhiteNoise => Err(Error::Unsupported(
                "spatial white noise has no pointwise covariance function".into(),
            )),
            KernelFamily::Riesz => Ok(if r == 0.0 {
                f64::INFINITY
            } else {
                self.constant * r.powf(a - d)
            }),
            KernelFamily::Bessel => Ok(self.constant * bessel_integral(a, d, r)),
            KernelFamily::Heat => Ok(self.constant * (-r * r / (4.0 * a)).exp()),
            KernelFamily::Poisson => Ok(self.constant * (r * r + a * a).powf(-(d + 1.0) / 2.0)),
        }
    }
}

/// `γ_{α,d} = 2^{d-α} π^{d/2} Γ((d-α)/2) / Γ(α/2)`.
pub fn riesz_constant(alpha: f64, d: f64) -> f64 {
    ((d - alpha) * std::f64::consts::LN_2 + 0.5 * d * PI.ln() + ln_gamma((d - alpha) / 2.0)
        - ln_gamma(alpha / 2.0))
    .exp()
}

/// `∫_0^∞ w^{(α-d)/2 - 1} e^{-w} e^{-r²/(4w)} dw` (without the family constant).
///
/// Integrated in `ℓ = ln w` with a sinh-mapped trapezoid centred on the
/// saddle point of the exponent.
fn bessel_integral(alpha: f64, d: f64, r: f64) -> f64 {
    let nu = (alpha - d) / 2.0;
    if r == 0.0 {
        return if nu > 0.0 { gamma(nu) } else { f64::INFINITY };
    }
    let q = r * r / 4.0;
    let root = (nu * nu + r * r).sqrt();
    let saddle = if nu >= 0.0 { 0.5 * (nu + root) } else { 0.5 * r * r / (root - nu) };
    let center = saddle.max(1e-300).ln();
    sinh_trapezoid_log(|l| nu * l - l.exp() - q * (-l).exp(), center, MIXTURE_TOL).value
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `f(x)` for the kernel family; `+∞` at the origin where the kernel is singular.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim {
        return domain(format!("point has {} coordinates, kernel dimension is {}", x.len(), spec.dim));
    }
    spec.radial_eval(norm(x))
}

/// Spectral density `μ(dξ)/dξ` in the printed form
/// (Riesz `|ξ|^{-α}`, Bessel `(1+|ξ|²)^{-α/2}`, heat `e^{-π²α|ξ|²}`,
/// Poisson `e^{-4π²α|ξ|}`; white noise `(2π)^{-d}`).
pub fn spectral_density(spec: &KernelSpec, xi: &[f64]) -> Result<f64> {
    if xi.len() != spec.dim {
        return domain(format!("frequency has {} coordinates, kernel dimension is {}", xi.len(), spec.dim));
    }
    let r = norm(xi);
    let a = spec.alpha;
    Ok(match spec.family {
        KernelFamily::WhiteNoise => (2.0 * PI).powf(-spec.d()),
        KernelFamily::Riesz => r.powf(-a),
        KernelFamily::Bessel => (1.0 + r * r).powf(-a / 2.0),
        KernelFamily::Heat => (-PI * PI * a * r * r).exp(),
        KernelFamily::Poisson => (-4.0 * PI * PI * a * r).exp(),
    })
}

/// Result of inverting a spectral density numerically and comparing with the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralCheck {
    /// `∫ e^{-iξx} μ(dξ)`.
    pub inverted: f64,
    /// `f(x)` from [`kernel_eval`].
    pub kernel: f64,
    pub rel_discrepancy: f64,
    /// True when the two agree to 1e-6 relative.
    pub consistent: bool,
}

/// Checks in `d = 1` whether `∫ e^{-iξx} μ(dξ)` reproduces `f(x)` for the
/// printed spectral density.
///
/// Only families whose density is absolutely integrable with enough decay
/// are supported: heat, Poisson, and Bessel with `α ≥ 2`.
pub fn spectral_consistency(spec: &KernelSpec, x: f64) -> Result<SpectralCheck> {
    if spec.dim != 1 {
        return Err(Error::Unsupported("spectral inversion check is implemented for d = 1 only".into()));
    }
    let supported = match spec.family {
        KernelFamily::Heat | KernelFamily::Poisson => true,
        KernelFamily::Bessel => spec.alpha >= 2.0,
        _ => false,
    };
    if !supported {
        return Err(Error::Unsupported(format!(
            "spectral density of the {} kernel is not absolutely integrable enough to invert",
            spec.family
        )));
    }
    let density = |xi: f64| spectral_density(spec, &[xi]).unwrap_or(0.0);
    // Even density: ∫ e^{-iξx} μ = 2 ∫_0^∞ cos(ξx) μ(ξ) dξ.
    let rule = gauss_legendre(16);
    let width = if x.abs() > 0.0 { (1.0 / x.abs()).min(0.5) } else { 0.5 };
    let mut acc = 0.0;
    let mut lo = 0.0;
    let cap = 2e5;
    while lo < cap {
        let hi = lo + width;
        let piece = rule.apply(lo, hi, |xi| (xi * x).cos() * density(xi));
        acc += piece;
        lo = hi;
        if density(lo) < 1e-18 * density(0.0) {
            break;
        }
    }
    let inverted = 2.0 * acc;
    let kernel = kernel_eval(spec, &[x])?;
    let rel = (inverted - kernel).abs() / kernel.abs().max(1e-300);
    Ok(SpectralCheck {
        inverted,
        kernel,
        rel_discrepancy: rel,
        consistent: rel < 1e-6,
    })
}

/// `α_f` for the family.
pub fn existence_exponent(spec: &KernelSpec) -> f64 {
    spec.alpha_f
}

/// `C_d` with `(1+y)^{d/2} ≤ C_d (1 + y^{d/2})` for all `y ≥ 0`.
///
/// Equals `2^{d/2-1}` for `d ≥ 2`; in `d = 1` concavity gives `C_1 = 1`.
pub fn convexity_constant(dim: usize) -> f64 {
    2f64.powf(dim as f64 / 2.0 - 1.0).max(1.0)
}

/// `E (2 W_d + c)^{-(d+1)/2}` for `W_d ~ χ²_d`, `c > 0`.
fn poisson_radial_moment(d: f64, c: f64) -> f64 {
    let q = (d + 1.0) / 2.0;
    let lg = ln_gamma(q);
    let center = -(c.max(1e-12)).ln();
    sinh_trapezoid_log(
        |l| q * l - c * l.exp() - 0.5 * d * softplus(4f64.ln() + l) - lg,
        center,
        MIXTURE_TOL,
    )
    .value
}

/// Constants of the power-law bracket `A (2t-s-r)^{-e} ≤ I_f(r,s) ≤ B (2t-s-r)^{-e}`
/// with `e = (d - α_f)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketConstants {
    pub lower: f64,
    pub upper: f64,
    pub exponent: f64,
    /// The lower constant is certified for `2t-s-r ≥ lower_valid_from`.
    pub lower_valid_from: f64,
}

/// Bracket constants for the family at time horizon `t` (the upper Poisson
/// constant is certified on `2t-s-r ≤ 2t`).
///
/// * Bessel: `A = γ' γ(α/2, 1) / (2 C_d)`, `B = γ' Γ(α/2)`; `A` holds for `2t-s-r ≥ 1`.
/// * heat: `A = γ'' α^{d/2} / (2 C_d)`, `B = γ'' α^{d/2}`; `A` holds for `2t-s-r ≥ α`.
/// * Poisson: `I (2t-s-r)^{(d+1)/2} = γ''' E(2W_d + α²/(2t-s-r))^{-(d+1)/2}` is
///   increasing in `2t-s-r`, so `A = γ''' E(2W_d + 1)^{-(d+1)/2}` for
///   `2t-s-r ≥ α²` and `B = γ''' E(2W_d + α²/(2t))^{-(d+1)/2}`.
/// * Riesz and white noise are exact power laws (`A = B`).
pub fn bracket_constants(spec: &KernelSpec, t: f64) -> BracketConstants {
    let d = spec.d();
    let a = spec.alpha;
    let c = spec.constant;
    let exponent = spec.corner_exponent();
    match spec.family {
        KernelFamily::WhiteNoise => {
            let k = (4.0 * PI).powf(-d / 2.0);
            BracketConstants {
                lower: k,
                upper: k,
                exponent,
                lower_valid_from: 0.0,
            }
        }
        KernelFamily::Riesz => {
            let p = (d - a) / 2.0;
            let k = c * 2f64.powf(-p) * chi2_neg_moment(spec.dim, p).unwrap_or(f64::NAN);
            BracketConstants {
                lower: k,
                upper: k,
                exponent,
                lower_valid_from: 0.0,
            }
        }
        KernelFamily::Bessel => {
            let lower_gamma = gamma_li(a / 2.0, 1.0);
            BracketConstants {
                lower: c * lower_gamma / (2.0 * convexity_constant(spec.dim)),
                upper: c * gamma(a / 2.0),
                exponent,
                lower_valid_from: 1.0,
            }
        }
        KernelFamily::Heat => {
            let k = c * a.powf(d / 2.0);
            BracketConstants {
                lower: k / (2.0 * convexity_constant(spec.dim)),
                upper: k,
                exponent,
                lower_valid_from: a,
            }
        }
        KernelFamily::Poisson => BracketConstants {
            lower: c * poisson_radial_moment(d, 1.0),
            upper: c * poisson_radial_moment(d, a * a / (2.0 * t)),
            exponent,
            lower_valid_from: a * a,
        },
    }
}

/// Closed form (when available) and power-law bracket of
/// `I_f(r,s) = ∫∫ g_{tx}(s,y) f(y-z) g_{tx}(r,z) dy dz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IfValue {
    /// Exact value: closed form for white/Riesz/heat, one-dimensional
    /// mixture quadrature for Bessel/Poisson.
    pub exact: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Whether `2t-s-r` lies in the range where `lower` is certified.
    pub lower_certified: bool,
}

pub fn closed_form_i_f(spec: &KernelSpec, t: f64, r: f64, s: f64) -> Result<IfValue> {
    if !(r >= 0.0 && s >= 0.0 && r < t && s < t) {
        return domain(format!("I_f(r, s) needs 0 <= r, s < t, got t = {t}, r = {r}, s = {s}"));
    }
    let x = 2.0 * t - s - r;
    let consts = bracket_constants(spec, t);
    let shape = x.powf(-consts.exponent);
    let exact = gaussian_average(spec, x, &vec![0.0; spec.dim])?;
    let (lower, upper) = match spec.family {
        KernelFamily::WhiteNoise | KernelFamily::Riesz => (exact, exact),
        _ => (consts.lower * shape, consts.upper * shape),
    };
    Ok(IfValue {
        exact: Some(exact),
        lower,
        upper,
        lower_certified: x >= consts.lower_valid_from,
    })
}

/// `E f(w + U)` with `U ~ N(0, 2σ I_d)`, `σ > 0`.
///
/// With `σ = u + v` and `w = y - z` this is `J_f(u, v, y, z)`; with `w = 0`
/// and `σ = 2t - s - r` it is `I_f(r, s)`. For white noise the kernel is
/// the Dirac mass and the value is the Gaussian density of `U` at `-w`.
pub fn gaussian_average(spec: &KernelSpec, sigma: f64, w: &[f64]) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("smoothing variance parameter must be positive, got {sigma}"));
    }
    if w.len() != spec.dim {
        return domain(format!("offset has {} coordinates, kernel dimension is {}", w.len(), spec.dim));
    }
    let d = spec.d();
    let a = spec.alpha;
    let c = spec.constant;
    let w2: f64 = w.iter().map(|v| v * v).sum();
    let ln4s = (4.0 * sigma).ln();
    let gauss = move |l: f64| -> f64 {
        let sp = softplus(ln4s + l);
        -0.5 * d * sp - w2 * (l - sp).exp()
    };
    let value = match spec.family {
        KernelFamily::WhiteNoise => (4.0 * PI * sigma).powf(-d / 2.0) * (-w2 / (4.0 * sigma)).exp(),
        KernelFamily::Heat => c * (1.0 + sigma / a).powf(-d / 2.0) * (-w2 / (4.0 * (a + sigma))).exp(),
        KernelFamily::Riesz => {
            let p = (d - a) / 2.0;
            if w2 == 0.0 {
                c * (2.0 * sigma).powf(-p) * chi2_neg_moment(spec.dim, p)?
            } else {
                let lead = c.ln() - ln_gamma(p);
                let center = -(4.0 * sigma + w2).ln();
                sinh_trapezoid_log(|l| lead + p * l + gauss(l), center, MIXTURE_TOL).value
            }
        }
        KernelFamily::Bessel => {
            let nu = (a - d) / 2.0;
            let lead = c.ln() - nu * 4f64.ln();
            let center = -(4.0 * (1.0 + sigma + w2.sqrt())).ln();
            sinh_trapezoid_log(|l| lead - nu * l - 0.25 * (-l).exp() + gauss(l), center, MIXTURE_TOL).value
        }
        KernelFamily::Poisson => {
            let q = (d + 1.0) / 2.0;
            let lead = c.ln() - ln_gamma(q);
            let center = -(a * a + 4.0 * sigma + w2).ln();
            sinh_trapezoid_log(|l| lead + q * l - a * a * l.exp() + gauss(l), center, MIXTURE_TOL).value
        }
    };
    Ok(value)
}
