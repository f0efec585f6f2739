//! Chi-square moments, noncentral decompositions and Monte Carlo estimators
//! used as independent checks on the quadrature routes.
//!
//! Monte Carlo runs are split into fixed-size chunks; chunk `k` of a run
//! draws from ChaCha8 stream `(stream_id << 32) | k`, and chunk summaries
//! are merged in chunk order, so results do not depend on the number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::spatial_kernels::{KernelFamily, KernelSpec};

/// Samples per chunk.
pub const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    /// Must fit in 32 bits; the low 32 bits of the ChaCha stream index the chunk.
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Result<Self> {
        if stream_id >= 1 << 32 {
            return domain(format!("stream id must be below 2^32, got {stream_id}"));
        }
        Ok(Self { seed, stream_id })
    }

    /// Generator for chunk `chunk` of this stream.
    pub fn chunk_rng(&self, chunk: u64) -> ChaCha8Rng {
        debug_assert!(chunk < 1 << 32);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.stream_id << 32) | (chunk & 0xffff_ffff));
        rng
    }
}

/// Streaming mean/variance with Chan's parallel merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += d * nb / n as f64;
        self.m2 += other.m2 + d * d * na * nb / n as f64;
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    /// False when the integrand has infinite variance, so `std_error` is not meaningful.
    pub variance_reliable: bool,
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    if n.div_ceil(CHUNK) >= 1 << 32 {
        return domain("sample size too large");
    }
    Ok(())
}

/// Mean of `f` over `n` draws.
pub fn monte_carlo<F>(rng: RngSpec, n: u64, f: F) -> Result<Welford>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    check_n(n)?;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Welford> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng.chunk_rng(c);
            let m = CHUNK.min(n - c * CHUNK);
            let mut w = Welford::default();
            for _ in 0..m {
                w.push(f(&mut r));
            }
            w
        })
        .collect();
    let mut total = Welford::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// `n` draws of `f`, in a thread-count independent order.
pub fn draw_samples<F>(rng: RngSpec, n: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    check_n(n)?;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng.chunk_rng(c);
            let m = CHUNK.min(n - c * CHUNK);
            (0..m).map(|_| f(&mut r)).collect()
        })
        .collect();
    Ok(parts.concat())
}

/// `E W^{-p} = 2^{-p} Γ(d/2 - p) / Γ(d/2)` for `W ~ χ²_d`, `p < d/2`.
pub fn chi2_neg_moment(dim: usize, p: f64) -> Result<f64> {
    if dim == 0 {
        return domain("chi-square degrees of freedom must be at least 1");
    }
    let h = dim as f64 / 2.0;
    if !(p.is_finite() && p < h) {
        return domain(format!("E W^(-p) is finite only for p < d/2 = {h}, got p = {p}"));
    }
    Ok((-p * std::f64::consts::LN_2 + ln_gamma(h - p) - ln_gamma(h)).exp())
}

/// `E e^{-cW} = (1 + 2c)^{-d/2}` for `W ~ χ²_d`, `c > -1/2`.
pub fn chi2_mgf(dim: usize, c: f64) -> Result<f64> {
    if dim == 0 {
        return domain("chi-square degrees of freedom must be at least 1");
    }
    if !(c > -0.5) {
        return domain(format!("chi-square Laplace transform needs c > -1/2, got {c}"));
    }
    Ok((1.0 + 2.0 * c).powf(-(dim as f64) / 2.0))
}

/// `E e^{-c|Z + μ|²} = (1 + 2c)^{-d/2} exp(-c|μ|² / (1 + 2c))` for `Z ~ N(0, I_d)`.
pub fn noncentral_mgf(dim: usize, mu_norm: f64, c: f64) -> Result<f64> {
    Ok(chi2_mgf(dim, c)? * (-c * mu_norm * mu_norm / (1.0 + 2.0 * c)).exp())
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Draws of `|Z + μ|²` with `Z ~ N(0, I_d)`, `d = μ.len()`.
pub fn sample_noncentral(mu: &[f64], rng: RngSpec, n: u64) -> Result<Vec<f64>> {
    if mu.is_empty() {
        return domain("mean vector must have at least one coordinate");
    }
    draw_samples(rng, n, |r| mu.iter().map(|m| (normal(r) + m).powi(2)).sum())
}

/// Draws of `W_{d-1} + (Z + |μ|)²` with independent `W_{d-1} ~ χ²_{d-1}` and
/// `Z ~ N(0, 1)`; equal in law to `|Z + μ|²` by rotation invariance.
pub fn sample_noncentral_decomposed(dim: usize, mu_norm: f64, rng: RngSpec, n: u64) -> Result<Vec<f64>> {
    if dim == 0 {
        return domain("dimension must be at least 1");
    }
    let chi = if dim > 1 {
        Some(ChiSquared::new((dim - 1) as f64).map_err(|e| Error::Domain(e.to_string()))?)
    } else {
        None
    };
    draw_samples(rng, n, |r| {
        let w = chi.as_ref().map_or(0.0, |c| c.sample(r));
        w + (normal(r) + mu_norm).powi(2)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic 1% critical value `1.628 sqrt((n + m) / (n m))`.
    pub critical_1pct: f64,
    pub passed: bool,
}

/// Two-sample Kolmogorov-Smirnov test at the 1% level.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return domain("KS test needs non-empty samples");
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return domain("KS test samples contain NaN");
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    let crit = 1.628 * ((nf + mf) / (nf * mf)).sqrt();
    Ok(KsResult {
        statistic: d,
        critical_1pct: crit,
        passed: d <= crit,
    })
}

/// Whether `f(U)` has finite variance for Gaussian `U`: the singular
/// kernels behave like `|x|^{α-d}` at 0, square-integrable iff `2(d-α) < d`.
fn variance_finite(spec: &KernelSpec) -> bool {
    let d = spec.dim as f64;
    match spec.family {
        KernelFamily::Riesz => 2.0 * (d - spec.alpha) < d,
        KernelFamily::Bessel => spec.alpha >= d || 2.0 * (d - spec.alpha) < d,
        _ => true,
    }
}

fn require_pointwise(spec: &KernelSpec) -> Result<()> {
    if spec.family == KernelFamily::WhiteNoise {
        return Err(Error::Unsupported("Monte Carlo needs a pointwise covariance kernel".into()));
    }
    Ok(())
}

/// Monte Carlo estimate of `I_f(r, s) = E f(U)`, `U ~ N(0, 2(2t-s-r) I_d)`,
/// sampling `|U| = sqrt(2(2t-s-r) W)` with `W ~ χ²_d`.
pub fn mc_i_f(spec: &KernelSpec, t: f64, r: f64, s: f64, rng: RngSpec, n: u64) -> Result<MCEstimate> {
    require_pointwise(spec)?;
    if !(r >= 0.0 && s >= 0.0 && r < t && s < t) {
        return domain(format!("I_f(r, s) needs 0 <= r, s < t, got t = {t}, r = {r}, s = {s}"));
    }
    let x = 2.0 * t - s - r;
    let chi = ChiSquared::new(spec.dim as f64).map_err(|e| Error::Domain(e.to_string()))?;
    let w = monte_carlo(rng, n, |g| {
        let radius = (2.0 * x * chi.sample(g)).sqrt();
        spec.radial_eval(radius).unwrap_or(f64::NAN)
    })?;
    Ok(MCEstimate {
        mean: w.mean,
        std_error: w.std_error(),
        n_samples: w.n,
        variance_reliable: variance_finite(spec),
    })
}

/// Monte Carlo estimate of `J_f(u, v, y, z) = E f(y - z + U)`, `U ~ N(0, 2(u+v) I_d)`.
pub fn mc_j_f(spec: &KernelSpec, u: f64, v: f64, y: &[f64], z: &[f64], rng: RngSpec, n: u64) -> Result<MCEstimate> {
    require_pointwise(spec)?;
    if !(u >= 0.0 && v >= 0.0 && u + v > 0.0) {
        return domain(format!("J_f needs u, v >= 0 with u + v > 0, got {u}, {v}"));
    }
    if y.len() != spec.dim || z.len() != spec.dim {
        return domain(format!("points must have dimension {}", spec.dim));
    }
    let sd = (2.0 * (u + v)).sqrt();
    let w0: Vec<f64> = y.iter().zip(z).map(|(a, b)| a - b).collect();
    let w = monte_carlo(rng, n, |g| {
        let r2: f64 = w0.iter().map(|c| (c + sd * normal(g)).powi(2)).sum();
        spec.radial_eval(r2.sqrt()).unwrap_or(f64::NAN)
    })?;
    Ok(MCEstimate {
        mean: w.mean,
        std_error: w.std_error(),
        n_samples: w.n,
        variance_reliable: variance_finite(spec),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial_kernels::gaussian_average;

    #[test]
    fn chi2_negative_moment_fixture() {
        // E W_3^{-1/2} = sqrt(2/π).
        let v = chi2_neg_moment(3, 0.5).unwrap();
        assert!((v - 0.797884560802865356).abs() < 1e-14, "{v}");
        assert_eq!(chi2_neg_moment(4, 0.0).unwrap(), 1.0);
        assert!(chi2_neg_moment(2, 1.0).is_err());
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Welford::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-10);
    }

    #[test]
    fn chi2_moment_by_simulation() {
        let rng = RngSpec::new(7, 1).unwrap();
        let chi = ChiSquared::new(5.0).unwrap();
        let w = monte_carlo(rng, 200_000, |g| { let x: f64 = chi.sample(g); x.powf(-0.7) }).unwrap();
        let exact = chi2_neg_moment(5, 0.7).unwrap();
        assert!((w.mean - exact).abs() < 4.0 * w.std_error(), "{} {exact}", w.mean);
    }

    #[test]
    fn noncentral_mgf_by_simulation() {
        let mu = [0.6, -0.8, 0.0];
        let rng = RngSpec::new(3, 2).unwrap();
        let c = 0.37;
        let w = monte_carlo(rng, 200_000, |g| {
            let r2: f64 = mu.iter().map(|m| (normal(g) + m).powi(2)).sum();
            (-c * r2).exp()
        })
        .unwrap();
        let exact = noncentral_mgf(3, 1.0, c).unwrap();
        assert!((w.mean - exact).abs() < 4.0 * w.std_error());
    }

    #[test]
    fn decomposition_passes_ks() {
        let mu = [1.0, 0.5, -0.25];
        let m = mu.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a = sample_noncentral(&mu, RngSpec::new(11, 0).unwrap(), 20_000).unwrap();
        let b = sample_noncentral_decomposed(3, m, RngSpec::new(11, 1).unwrap(), 20_000).unwrap();
        let ks = ks_two_sample(&a, &b).unwrap();
        assert!(ks.passed, "{ks:?}");
    }

    #[test]
    fn ks_rejects_shifted_samples() {
        let a = sample_noncentral(&[0.0, 0.0], RngSpec::new(1, 0).unwrap(), 5000).unwrap();
        let b = sample_noncentral(&[1.5, 0.0], RngSpec::new(1, 1).unwrap(), 5000).unwrap();
        assert!(!ks_two_sample(&a, &b).unwrap().passed);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let spec = KernelSpec::heat(0.5, 2).unwrap();
        let rng = RngSpec::new(99, 4).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_i_f(&spec, 1.0, 0.2, 0.3, rng, 3 * CHUNK + 17).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn mc_j_f_agrees_with_mixture() {
        let spec = KernelSpec::poisson(0.7, 2).unwrap();
        let rng = RngSpec::new(5, 9).unwrap();
        let est = mc_j_f(&spec, 0.2, 0.3, &[0.4, 0.0], &[0.0, 0.1], rng, 100_000).unwrap();
        let exact = gaussian_average(&spec, 0.5, &[0.4, -0.1]).unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.std_error, "{est:?} {exact}");
    }

    #[test]
    fn variance_flags() {
        let rng = RngSpec::new(1, 0).unwrap();
        let r = mc_i_f(&KernelSpec::riesz(1.0, 4).unwrap(), 1.0, 0.5, 0.5, rng, 10).unwrap();
        assert!(!r.variance_reliable);
        let r = mc_i_f(&KernelSpec::riesz(3.0, 4).unwrap(), 1.0, 0.5, 0.5, rng, 10).unwrap();
        assert!(r.variance_reliable);
        assert!(mc_i_f(&KernelSpec::white(1).unwrap(), 1.0, 0.5, 0.5, rng, 10).is_err());
        assert!(RngSpec::new(1, 1 << 32).is_err());
    }
}
