use fracheat::field_sim::{spatial_rectangle_covariance, CovarianceMatrix, Rectangle};
use fracheat::fractional_time::{fbm_covariance, SampledFunction};
use fracheat::gaussian_oracles::{ks_two_sample, Welford};
use fracheat::heat_green::SpaceTimePoint;
use fracheat::norms_existence::{covariance_solution, existence_check, norm_g_colored, norm_g_white, ColoredNorm};
use fracheat::spatial_kernels::{closed_form_i_f, gaussian_average, kernel_eval};
use fracheat::{derive_hurst_params, KernelFamily, KernelSpec, QuadratureSpec};
use proptest::prelude::*;

fn bounded_family() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![
        Just(KernelFamily::Bessel),
        Just(KernelFamily::Heat),
        Just(KernelFamily::Poisson),
    ]
}

fn any_spec() -> impl Strategy<Value = KernelSpec> {
    (1usize..=3, 0.2f64..0.95, 0..4usize).prop_map(|(d, frac, k)| match k {
        0 => KernelSpec::riesz(frac * d as f64, d).unwrap(),
        1 => KernelSpec::bessel(0.5 + 2.0 * frac, d).unwrap(),
        2 => KernelSpec::heat(0.1 + frac, d).unwrap(),
        _ => KernelSpec::poisson(0.1 + frac, d).unwrap(),
    })
}

fn rotate(x: &[f64], theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    let mut y = x.to_vec();
    y[0] = c * x[0] - s * x[1];
    y[1] = s * x[0] + c * x[1];
    y
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fbm_gram_matrix_is_psd(h in 0.51f64..0.99, times in prop::collection::vec(0.01f64..2.0, 2..8)) {
        let hp = derive_hurst_params(h).unwrap();
        let n = times.len();
        let mut entries = Vec::with_capacity(n * n);
        for &a in &times {
            for &b in &times {
                entries.push(fbm_covariance(&hp, a, b).unwrap());
            }
        }
        let scale = times.iter().map(|t| t.powf(2.0 * h)).fold(0.0, f64::max);
        let m = CovarianceMatrix::from_entries(n, entries).unwrap();
        prop_assert!(m.min_eigenvalue() >= -1e-10 * scale);
    }

    #[test]
    fn kernels_are_rotation_invariant(spec in any_spec(), r in 0.05f64..3.0, phi in 0.0f64..6.3, theta in 0.0f64..6.3) {
        prop_assume!(spec.dim >= 2);
        let mut x = vec![0.0; spec.dim];
        x[0] = r * phi.cos();
        x[1] = r * phi.sin();
        let a = kernel_eval(&spec, &x).unwrap();
        let b = kernel_eval(&spec, &rotate(&x, theta)).unwrap();
        prop_assert!(close(a, b, 1e-10), "{a} vs {b}");
        prop_assert!(close(a, spec.radial_eval(r).unwrap(), 1e-10));
    }

    #[test]
    fn gaussian_average_even_and_radial(spec in any_spec(), sigma in 0.05f64..2.0, w0 in -2.0f64..2.0, theta in 0.0f64..6.3) {
        let mut w = vec![0.0; spec.dim];
        w[0] = w0;
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let a = gaussian_average(&spec, sigma, &w).unwrap();
        prop_assert!(close(a, gaussian_average(&spec, sigma, &neg).unwrap(), 1e-9));
        if spec.dim >= 2 {
            prop_assert!(close(a, gaussian_average(&spec, sigma, &rotate(&w, theta)).unwrap(), 1e-9));
        }
    }

    #[test]
    fn i_f_monotone_and_bracketed(family in bounded_family(), d in 1usize..=3, alpha in 0.3f64..1.5,
                                  t in 0.5f64..2.0, u in 0.0f64..0.99, v in 0.0f64..0.99, step in 0.001f64..0.5) {
        let spec = KernelSpec::new(family, alpha, d).unwrap();
        let (r, s) = (u * t, v * t);
        let r2 = (r + step * t).min(0.999 * t);
        prop_assume!(r2 > r);
        let a = closed_form_i_f(&spec, t, r, s).unwrap();
        let b = closed_form_i_f(&spec, t, r2, s).unwrap();
        let (ea, eb) = (a.exact.unwrap(), b.exact.unwrap());
        // I_f grows as 2t - s - r shrinks.
        prop_assert!(eb >= ea * (1.0 - 1e-10), "{ea} then {eb}");
        prop_assert!(ea <= a.upper * (1.0 + 1e-9), "exact {ea} above upper {}", a.upper);
        if a.lower_certified {
            prop_assert!(ea >= a.lower * (1.0 - 1e-9), "exact {ea} below lower {}", a.lower);
        }
    }

    #[test]
    fn existence_is_monotone_in_hurst(spec in any_spec(), h1 in 0.501f64..0.999, h2 in 0.501f64..0.999) {
        let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
        let a = existence_check(&spec, lo).unwrap();
        let b = existence_check(&spec, hi).unwrap();
        prop_assert!(!a.admissible || b.admissible);
        prop_assert_eq!(a.threshold, b.threshold);
        prop_assert!(a.threshold >= 0.5);
    }

    #[test]
    fn welford_merge_matches_single_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut left, mut right) = (Welford::default(), Welford::default());
        xs[..cut].iter().for_each(|&x| left.push(x));
        xs[cut..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        prop_assert_eq!(left.n, whole.n);
        prop_assert!((left.mean - whole.mean).abs() <= 1e-9 * (1.0 + whole.mean.abs()));
        prop_assert!((left.variance() - whole.variance()).abs() <= 1e-8 * (1.0 + whole.variance()));
    }

    #[test]
    fn ks_statistic_in_unit_interval(a in prop::collection::vec(-10.0f64..10.0, 1..100),
                                     b in prop::collection::vec(-10.0f64..10.0, 1..100)) {
        let ks = ks_two_sample(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ks.statistic));
        prop_assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
    }

    #[test]
    fn sampled_function_rejects_unsorted_grid(mut grid in prop::collection::vec(0.0f64..1.0, 2..10)) {
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        prop_assume!(grid.len() >= 2);
        let n = grid.len();
        prop_assert!(SampledFunction::new(grid.clone(), vec![1.0; n], 1.0).is_ok());
        let mut rev = grid.clone();
        rev.reverse();
        prop_assert!(SampledFunction::new(rev, vec![1.0; n], 1.0).is_err());
        prop_assert!(SampledFunction::new(grid.clone(), vec![1.0; n - 1], 1.0).is_err());
        let top = grid[n - 1];
        prop_assume!(top > 0.0);
        prop_assert!(SampledFunction::new(grid, vec![1.0; n], 0.5 * top).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rectangle_covariance_symmetric_and_additive(family in bounded_family(), alpha in 0.3f64..1.5,
                                                   a in -1.0f64..1.0, w in 0.1f64..1.0, cut in 0.1f64..0.9,
                                                   b in -1.0f64..1.0, w2 in 0.1f64..1.0) {
        let spec = KernelSpec::new(family, alpha, 1).unwrap();
        let r1 = Rectangle::new(vec![a], vec![a + w]).unwrap();
        let r2 = Rectangle::new(vec![b], vec![b + w2]).unwrap();
        let left = Rectangle::new(vec![a], vec![a + cut * w]).unwrap();
        let right = Rectangle::new(vec![a + cut * w], vec![a + w]).unwrap();
        let c12 = spatial_rectangle_covariance(&spec, &r1, &r2).unwrap();
        let c21 = spatial_rectangle_covariance(&spec, &r2, &r1).unwrap();
        prop_assert!(close(c12, c21, 1e-8), "{c12} vs {c21}");
        let split = spatial_rectangle_covariance(&spec, &left, &r2).unwrap()
            + spatial_rectangle_covariance(&spec, &right, &r2).unwrap();
        prop_assert!(close(c12, split, 1e-7), "{c12} vs {split}");
    }

    #[test]
    fn solution_covariance_symmetric_and_cauchy_schwarz(family in bounded_family(), alpha in 0.3f64..1.5,
                                                        h in 0.55f64..0.95, t1 in 0.2f64..1.0, t2 in 0.2f64..1.0,
                                                        x1 in -0.5f64..0.5, x2 in -0.5f64..0.5) {
        let spec = KernelSpec::new(family, alpha, 1).unwrap();
        let hp = derive_hurst_params(h).unwrap();
        let q = QuadratureSpec { rel_tolerance: 1e-8, ..QuadratureSpec::default() };
        let p1 = SpaceTimePoint::new(t1, vec![x1]).unwrap();
        let p2 = SpaceTimePoint::new(t2, vec![x2]).unwrap();
        let c12 = covariance_solution(&spec, &hp, &p1, &p2, &q).unwrap().value;
        let c21 = covariance_solution(&spec, &hp, &p2, &p1, &q).unwrap().value;
        let c11 = covariance_solution(&spec, &hp, &p1, &p1, &q).unwrap().value;
        let c22 = covariance_solution(&spec, &hp, &p2, &p2, &q).unwrap().value;
        prop_assert!(close(c12, c21, 1e-7), "{c12} vs {c21}");
        prop_assert!(c12 * c12 <= c11 * c22 * (1.0 + 1e-7));
        let q1 = SpaceTimePoint::new(t1, vec![x1 + 0.37]).unwrap();
        let q2 = SpaceTimePoint::new(t2, vec![x2 + 0.37]).unwrap();
        let shifted = covariance_solution(&spec, &hp, &q1, &q2, &q).unwrap().value;
        prop_assert!(close(c12, shifted, 1e-7), "translation changed {c12} to {shifted}");
    }

    #[test]
    fn riesz_norm_scaling_law(d in 1usize..=3, frac in 0.2f64..0.9, h in 0.51f64..0.99, t in 0.2f64..2.0) {
        let alpha = frac * d as f64;
        let spec = KernelSpec::riesz(alpha, d).unwrap();
        let hp = derive_hurst_params(h).unwrap();
        prop_assume!(existence_check(&spec, h).unwrap().admissible);
        let q = QuadratureSpec::default();
        let value = |t| match norm_g_colored(&spec, &hp, t, &q).unwrap() {
            ColoredNorm::Exact(n) => n.value,
            ColoredNorm::Bracket { .. } => unreachable!(),
        };
        let ratio = value(2.0 * t) / value(t);
        let predicted = 2f64.powf(2.0 * h - (d as f64 - alpha) / 2.0);
        prop_assert!(close(ratio, predicted, 1e-3), "{ratio} vs {predicted}");
    }

    #[test]
    fn white_norm_is_homogeneous(h in 0.51f64..0.99, t in 0.1f64..3.0) {
        let hp = derive_hurst_params(h).unwrap();
        let q = QuadratureSpec::default();
        let n1 = norm_g_white(1, &hp, 1.0, &q).unwrap().value;
        let nt = norm_g_white(1, &hp, t, &q).unwrap().value;
        prop_assert!(close(nt, n1 * t.powf(2.0 * h - 0.5), 1e-8), "{nt} vs {}", n1 * t.powf(2.0 * h - 0.5));
    }
}
