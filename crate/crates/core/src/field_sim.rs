//! Exact Gaussian sampling of the solution on a finite space-time grid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::fractional_time::{fbm_covariance, HurstParams};
use crate::gaussian_oracles::RngSpec;
use crate::heat_green::SpaceTimePoint;
use crate::norms_existence::{covariance_solution, QuadratureSpec};
use crate::quadrature::sinh_trapezoid_log;
use crate::spatial_kernels::{KernelFamily, KernelSpec};

pub const DEFAULT_MAX_GRID_POINTS: usize = 64;

/// Relative jitters tried in order; each is multiplied by the mean diagonal.
pub const DEFAULT_JITTER_SCHEDULE: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Smallest accepted Cholesky pivot, squared, relative to the mean diagonal.
const MIN_PIVOT_SQ: f64 = 1e-14;

/// Tensor grid `times × sites`, flattened time-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    times: Vec<f64>,
    sites: Vec<Vec<f64>>,
}

impl SpaceTimeGrid {
    pub fn new(times: Vec<f64>, sites: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || sites.is_empty() {
            return domain("grid needs at least one time and one site");
        }
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return domain("grid times must be positive and finite");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("grid times must be strictly increasing");
        }
        let d = sites[0].len();
        if d == 0 {
            return domain("sites need at least one coordinate");
        }
        for s in &sites {
            if s.len() != d || s.iter().any(|v| !v.is_finite()) {
                return domain("sites must all have the same dimension and finite coordinates");
            }
        }
        for (i, a) in sites.iter().enumerate() {
            if sites[..i].contains(a) {
                return domain("grid sites must be distinct");
            }
        }
        Ok(Self { times, sites })
    }

    /// `n_times` equally spaced times in `(0, horizon]` and `n_sites` sites
    /// spaced `spacing` apart along the first axis.
    pub fn uniform(n_times: usize, horizon: f64, n_sites: usize, spacing: f64, dim: usize) -> Result<Self> {
        if n_times == 0 || n_sites == 0 || dim == 0 {
            return domain("grid sizes and dimension must be positive");
        }
        if !(horizon > 0.0 && spacing > 0.0 && horizon.is_finite() && spacing.is_finite()) {
            return domain("horizon and spacing must be positive and finite");
        }
        let times = (1..=n_times).map(|k| horizon * k as f64 / n_times as f64).collect();
        let sites = (0..n_sites)
            .map(|j| {
                let mut x = vec![0.0; dim];
                x[0] = j as f64 * spacing;
                x
            })
            .collect();
        Self::new(times, sites)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.sites
    }

    pub fn dim(&self) -> usize {
        self.sites[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len() * self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> SpaceTimePoint {
        let ns = self.sites.len();
        SpaceTimePoint {
            t: self.times[i / ns],
            x: self.sites[i % ns].clone(),
        }
    }
}

/// Dense symmetric covariance, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
    pub entry_errors: Vec<f64>,
    /// False if any entry's quadrature failed to converge.
    pub all_converged: bool,
    /// Absolute diagonal jitter used by the last successful factorization.
    pub jitter_applied: f64,
}

impl CovarianceMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n || n == 0 {
            return domain("covariance entries must form a non-empty square matrix");
        }
        Ok(Self {
            n,
            entries,
            entry_errors: vec![0.0; n * n],
            all_converged: true,
            jitter_applied: 0.0,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix()).eigenvalues.min()
    }

    fn mean_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum::<f64>() / self.n as f64
    }
}

/// Pairwise second moments of the solution on the grid, computed in parallel.
pub fn assemble_covariance(
    grid: &SpaceTimeGrid,
    spec: &KernelSpec,
    hp: &HurstParams,
    quad: &QuadratureSpec,
) -> Result<CovarianceMatrix> {
    assemble_covariance_capped(grid, spec, hp, quad, DEFAULT_MAX_GRID_POINTS)
}

pub fn assemble_covariance_capped(
    grid: &SpaceTimeGrid,
    spec: &KernelSpec,
    hp: &HurstParams,
    quad: &QuadratureSpec,
    max_points: usize,
) -> Result<CovarianceMatrix> {
    let n = grid.len();
    if n > max_points {
        return domain(format!("grid has {n} points, more than the cap of {max_points}"));
    }
    if grid.dim() != spec.dim {
        return domain(format!("grid dimension {} does not match kernel dimension {}", grid.dim(), spec.dim));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let results = pairs
        .par_iter()
        .map(|&(i, j)| covariance_solution(spec, hp, &grid.point(i), &grid.point(j), quad))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = vec![0.0; n * n];
    let mut errors = vec![0.0; n * n];
    let mut all_converged = true;
    for (&(i, j), r) in pairs.iter().zip(&results) {
        entries[i * n + j] = r.value;
        entries[j * n + i] = r.value;
        errors[i * n + j] = r.error_estimate;
        errors[j * n + i] = r.error_estimate;
        all_converged &= r.converged;
    }
    Ok(CovarianceMatrix {
        n,
        entries,
        entry_errors: errors,
        all_converged,
        jitter_applied: 0.0,
    })
}

/// Lower Cholesky factor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholeskyFactor {
    pub n: usize,
    pub lower: Vec<f64>,
    pub jitter_applied: f64,
}

/// Cholesky with the first jitter of `schedule` (relative to the mean
/// diagonal) for which every pivot clears `1e-14` of the mean diagonal.
pub fn factor_with_jitter(cov: &mut CovarianceMatrix, schedule: &[f64]) -> Result<CholeskyFactor> {
    if schedule.is_empty() || schedule.iter().any(|j| !(*j >= 0.0 && j.is_finite())) {
        return domain("jitter schedule must be a non-empty list of non-negative numbers");
    }
    let mean_diag = cov.mean_diagonal();
    if !(mean_diag > 0.0 && mean_diag.is_finite()) {
        return domain("covariance diagonal must be positive and finite");
    }
    let base = cov.matrix();
    let mut last = 0.0;
    for &rel in schedule {
        let jitter = rel * mean_diag;
        last = jitter;
        let mut m = base.clone();
        for i in 0..cov.n {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            let l = ch.l();
            let ok = (0..cov.n).all(|i| l[(i, i)] * l[(i, i)] >= MIN_PIVOT_SQ * mean_diag);
            if ok {
                cov.jitter_applied = jitter;
                let mut lower = Vec::with_capacity(cov.n * cov.n);
                for i in 0..cov.n {
                    for j in 0..cov.n {
                        lower.push(l[(i, j)]);
                    }
                }
                return Ok(CholeskyFactor {
                    n: cov.n,
                    lower,
                    jitter_applied: jitter,
                });
            }
        }
    }
    Err(Error::NotPsd { last_jitter: last })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub draw: u64,
    pub values: Vec<f64>,
}

/// `n` draws of `L Z`; draw `k` uses chunk stream `k` of `rng`.
pub fn sample_field(factor: &CholeskyFactor, n: u64, rng: RngSpec) -> Result<Vec<FieldSample>> {
    if n == 0 {
        return domain("number of draws must be positive");
    }
    if n >= 1 << 32 {
        return domain("too many draws");
    }
    let l = DMatrix::from_row_slice(factor.n, factor.n, &factor.lower);
    Ok((0..n)
        .into_par_iter()
        .map(|k| {
            let mut g = rng.chunk_rng(k);
            let z = DVector::from_fn(factor.n, |_, _| g.sample::<f64, _>(StandardNormal));
            FieldSample {
                draw: k,
                values: (&l * z).iter().copied().collect(),
            }
        })
        .collect())
}

/// Empirical covariance and the plug-in standard error of each entry,
/// `sqrt(var(X_i X_j) / n)` (samples are treated as mean zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCovariance {
    pub n: usize,
    pub entries: Vec<f64>,
    pub std_errors: Vec<f64>,
}

pub fn empirical_covariance(samples: &[FieldSample]) -> Result<EmpiricalCovariance> {
    if samples.len() < 2 {
        return domain("need at least two samples");
    }
    let n = samples[0].values.len();
    if samples.iter().any(|s| s.values.len() != n) {
        return domain("samples have different lengths");
    }
    let m = samples.len() as f64;
    let mut entries = vec![0.0; n * n];
    let mut std_errors = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut w = crate::gaussian_oracles::Welford::default();
            for s in samples {
                w.push(s.values[i] * s.values[j]);
            }
            entries[i * n + j] = w.mean;
            entries[j * n + i] = w.mean;
            let se = (w.variance() / m).sqrt();
            std_errors[i * n + j] = se;
            std_errors[j * n + i] = se;
        }
    }
    Ok(EmpiricalCovariance { n, entries, std_errors })
}

/// Sample skewness and excess kurtosis of a sequence.
pub fn skewness_kurtosis(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 4 {
        return domain("need at least four values");
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

/// Axis-aligned box `∏ [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Rectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return domain("rectangle corners must have the same positive dimension");
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return domain("rectangle needs finite lower < upper in every coordinate");
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// `∫_a^b ∫_c^e exp(-λ(x-y)²) dy dx`.
fn box_gauss_1d(lambda: f64, a: f64, b: f64, c: f64, e: f64) -> f64 {
    let zs = [(b - c, 1.0), (b - e, -1.0), (a - c, -1.0), (a - e, 1.0)];
    let zmax = zs.iter().map(|(z, _)| z.abs()).fold(0.0, f64::max);
    if lambda * zmax * zmax < 1.0 {
        // Ψ(z) - 1/(2λ) = Σ_k (-λ)^k z^{2k+2} / (k! (2k+1)(2k+2)); the constants cancel.
        let psi = |z: f64| {
            let z2 = z * z;
            let mut term = z2;
            let mut acc = 0.0;
            for k in 0..60 {
                let kf = k as f64;
                let add = term / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
                acc += add;
                if add.abs() < 1e-18 * acc.abs() {
                    break;
                }
                term *= -lambda * z2 / (kf + 1.0);
            }
            acc
        };
        zs.iter().map(|(z, s)| s * psi(*z)).sum()
    } else {
        let sl = lambda.sqrt();
        let k = std::f64::consts::PI.sqrt() / (2.0 * sl);
        let psi = |z: f64| z * k * erf(sl * z) + (-lambda * z * z).exp() / (2.0 * lambda);
        zs.iter().map(|(z, s)| s * psi(*z)).sum::<f64>().max(0.0)
    }
}

/// `∫_{A1}∫_{A2} f(x - y) dy dx` (`vol(A1 ∩ A2)` for white noise).
pub fn spatial_rectangle_covariance(spec: &KernelSpec, a1: &Rectangle, a2: &Rectangle) -> Result<f64> {
    if a1.dim() != spec.dim || a2.dim() != spec.dim {
        return domain(format!("rectangles must have dimension {}", spec.dim));
    }
    let d = spec.dim as f64;
    let a = spec.alpha;
    let c = spec.constant;
    let log_boxes = |lambda: f64| -> f64 {
        (0..spec.dim)
            .map(|i| box_gauss_1d(lambda, a1.lower[i], a1.upper[i], a2.lower[i], a2.upper[i]).ln())
            .sum()
    };
    let scale: f64 = (0..spec.dim)
        .map(|i| (a1.upper[i] - a1.lower[i]).max(a2.upper[i] - a2.lower[i]))
        .fold(0.0, f64::max);
    let center = -2.0 * scale.ln();
    let tol = 1e-12;
    Ok(match spec.family {
        KernelFamily::WhiteNoise => (0..spec.dim)
            .map(|i| (a1.upper[i].min(a2.upper[i]) - a1.lower[i].max(a2.lower[i])).max(0.0))
            .product(),
        KernelFamily::Heat => c * log_boxes(1.0 / (4.0 * a)).exp(),
        KernelFamily::Riesz => {
            let p = (d - a) / 2.0;
            let lead = c.ln() - ln_gamma(p);
            sinh_trapezoid_log(|l| lead + p * l + log_boxes(l.exp()), center, tol).value
        }
        KernelFamily::Bessel => {
            let nu = (a - d) / 2.0;
            let lead = c.ln() - nu * 4f64.ln();
            sinh_trapezoid_log(|l| lead - nu * l - 0.25 * (-l).exp() + log_boxes(l.exp()), center.min(0.0), tol).value
        }
        KernelFamily::Poisson => {
            let q = (d + 1.0) / 2.0;
            let lead = c.ln() - ln_gamma(q);
            sinh_trapezoid_log(|l| lead + q * l - a * a * l.exp() + log_boxes(l.exp()), center, tol).value
        }
    })
}

/// `E W(1_{[0,t1]} 1_{A1}) W(1_{[0,t2]} 1_{A2}) = R_H(t1, t2) ∫_{A1}∫_{A2} f(x - y) dy dx`.
pub fn noise_covariance_rectangles(
    hp: &HurstParams,
    spec: &KernelSpec,
    t1: f64,
    a1: &Rectangle,
    t2: f64,
    a2: &Rectangle,
) -> Result<f64> {
    Ok(fbm_covariance(hp, t1, t2)? * spatial_rectangle_covariance(spec, a1, a2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional_time::derive_hurst_params;
    use crate::quadrature::{gauss_legendre, tanh_sinh};

    #[test]
    fn grid_validation() {
        assert!(SpaceTimeGrid::new(vec![0.5, 0.5], vec![vec![0.0]]).is_err());
        assert!(SpaceTimeGrid::new(vec![0.5], vec![vec![0.0], vec![0.0]]).is_err());
        assert!(SpaceTimeGrid::new(vec![0.0], vec![vec![0.0]]).is_err());
        let g = SpaceTimeGrid::uniform(3, 1.5, 2, 0.25, 2).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(5).t, 1.5);
        assert_eq!(g.point(5).x, vec![0.25, 0.0]);
    }

    #[test]
    fn box_series_and_closed_form_agree_at_switch() {
        let (a, b, c, e) = (0.0, 1.0, 0.5, 2.0);
        let zmax = 2.0f64;
        let l = 1.0 / (zmax * zmax);
        let lo = box_gauss_1d(l * (1.0 - 1e-9), a, b, c, e);
        let hi = box_gauss_1d(l * (1.0 + 1e-9), a, b, c, e);
        assert!((lo - hi).abs() < 1e-9 * lo);
        let q = gauss_legendre(40);
        let l = l * (1.0 - 1e-9);
        let direct = q.apply(a, b, |x| q.apply(c, e, |y| (-l * (x - y) * (x - y)).exp()));
        assert!((lo - direct).abs() < 1e-12, "{lo} {hi} {direct}");
    }

    #[test]
    fn riesz_unit_interval_matches_closed_form() {
        // ∫∫_{[0,1]²} γ |x-y|^{-1/2} = γ · 8/3.
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let r = Rectangle::new(vec![0.0], vec![1.0]).unwrap();
        let v = spatial_rectangle_covariance(&spec, &r, &r).unwrap();
        assert!((v / 6.68434206568266801 - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn disjoint_rectangles_match_tensor_quadrature() {
        let a1 = Rectangle::new(vec![0.0], vec![0.7]).unwrap();
        let a2 = Rectangle::new(vec![1.0], vec![1.8]).unwrap();
        for spec in [
            KernelSpec::bessel(0.8, 1).unwrap(),
            KernelSpec::poisson(0.6, 1).unwrap(),
            KernelSpec::heat(0.2, 1).unwrap(),
            KernelSpec::riesz(0.4, 1).unwrap(),
        ] {
            let q = gauss_legendre(48);
            let direct = q.apply(0.0, 0.7, |x| q.apply(1.0, 1.8, |y| spec.radial_eval((x - y).abs()).unwrap()));
            let v = spatial_rectangle_covariance(&spec, &a1, &a2).unwrap();
            assert!((v / direct - 1.0).abs() < 1e-9, "{spec:?}: {v} vs {direct}");
        }
    }

    #[test]
    fn overlapping_bessel_rectangles_match_singular_quadrature() {
        // ∫_0^1∫_0^1 f(|x-y|) = 2 ∫_0^1 (1 - z) f(z) dz.
        let spec = KernelSpec::bessel(0.6, 1).unwrap();
        let r = Rectangle::new(vec![0.0], vec![1.0]).unwrap();
        let direct = 2.0 * tanh_sinh(|z| (1.0 - z) * spec.radial_eval(z).unwrap(), 0.0, 1.0, 1e-13, 12).value;
        let v = spatial_rectangle_covariance(&spec, &r, &r).unwrap();
        assert!((v / direct - 1.0).abs() < 1e-9, "{v} vs {direct}");
    }

    #[test]
    fn white_rectangles_use_overlap_volume() {
        let spec = KernelSpec::white(2).unwrap();
        let a1 = Rectangle::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let a2 = Rectangle::new(vec![0.5, 0.25], vec![2.0, 2.0]).unwrap();
        assert!((spatial_rectangle_covariance(&spec, &a1, &a2).unwrap() - 0.375).abs() < 1e-15);
        let hp = derive_hurst_params(0.7).unwrap();
        let v = noise_covariance_rectangles(&hp, &spec, 1.0, &a1, 1.0, &a2).unwrap();
        assert!((v - 0.375).abs() < 1e-15);
    }

    #[test]
    fn jitter_recovers_singular_psd_matrix() {
        // Rank-one matrix: exact Cholesky has a zero pivot.
        let mut cov = CovarianceMatrix::from_entries(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let f = factor_with_jitter(&mut cov, &DEFAULT_JITTER_SCHEDULE).unwrap();
        assert!(f.jitter_applied > 0.0);
        assert_eq!(cov.jitter_applied, f.jitter_applied);
        let mut bad = CovarianceMatrix::from_entries(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(factor_with_jitter(&mut bad, &DEFAULT_JITTER_SCHEDULE), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn samples_reproduce_small_covariance() {
        let mut cov = CovarianceMatrix::from_entries(2, vec![2.0, 0.6, 0.6, 1.0]).unwrap();
        let f = factor_with_jitter(&mut cov, &[0.0]).unwrap();
        let s = sample_field(&f, 20_000, RngSpec::new(3, 0).unwrap()).unwrap();
        let e = empirical_covariance(&s).unwrap();
        for k in 0..4 {
            assert!((e.entries[k] - cov.entries[k]).abs() < 4.0 * e.std_errors[k]);
        }
    }

    #[test]
    fn assembly_respects_cap() {
        let g = SpaceTimeGrid::uniform(9, 1.0, 8, 0.1, 1).unwrap();
        let hp = derive_hurst_params(0.8).unwrap();
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        assert!(assemble_covariance(&g, &spec, &hp, &QuadratureSpec::default()).is_err());
    }
}
