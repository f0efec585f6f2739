//! Heat kernel `G(t, x) = (4πt)^{-d/2} exp(-|x|²/4t)` and its shifted form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A point `(t, x)` with `t > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: Vec<f64>) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return domain(format!("time must be positive and finite, got {t}"));
        }
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return domain("space coordinate must be a non-empty vector of finite numbers");
        }
        Ok(Self { t, x })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

pub fn green_eval(t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    if x.is_empty() {
        return domain("heat kernel needs at least one space dimension");
    }
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((4.0 * PI * t).powf(-d / 2.0) * (-r2 / (4.0 * t)).exp())
}

/// `g_{tx}(s, y) = G(t-s, x-y) 1_{[0,t)}(s)`.
pub fn g_tx_eval(t: f64, x: &[f64], s: f64, y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return domain("g_tx: x and y have different dimensions");
    }
    if !(0.0..t).contains(&s) {
        return Ok(0.0);
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    green_eval(t - s, &diff)
}

/// `∫ g_{tx}(s, y) g_{tx}(r, y) dy = (4π(2t-s-r))^{-d/2}` for `r, s ∈ [0, t)`.
pub fn pair_integral_white(dim: usize, t: f64, r: f64, s: f64) -> Result<f64> {
    if dim == 0 {
        return domain("dimension must be at least 1");
    }
    if !(r >= 0.0 && s >= 0.0 && r < t && s < t) {
        return domain(format!("pair integral needs 0 <= r, s < t, got t = {t}, r = {r}, s = {s}"));
    }
    Ok((4.0 * PI * (2.0 * t - s - r)).powf(-(dim as f64) / 2.0))
}

/// `∫ G(u, w - z) G(v, -z) dz = G(u + v, w)`: the cross-point analogue,
/// with `u = t1 - s`, `v = t2 - r` and `w = x1 - x2`.
pub fn pair_integral_white_offset(u: f64, v: f64, w: &[f64]) -> Result<f64> {
    if !(u > 0.0 && v > 0.0) {
        return domain(format!("offset pair integral needs u, v > 0, got {u}, {v}"));
    }
    green_eval(u + v, w)
}

pub(crate) fn offset(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn unit_mass() {
        let rule = gauss_legendre(64);
        let m = rule.apply(-15.0, 15.0, |x| green_eval(0.8, &[x]).unwrap());
        assert!((m - 1.0).abs() < 1e-13);
    }

    #[test]
    fn semigroup_in_one_dimension() {
        let rule = gauss_legendre(96);
        let (a, b, x) = (0.2, 0.5, 0.9);
        let conv = rule.apply(-12.0, 12.0, |z| green_eval(a, &[x - z]).unwrap() * green_eval(b, &[z]).unwrap());
        assert!((conv - green_eval(a + b, &[x]).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn pair_integral_matches_quadrature_in_two_dimensions() {
        let rule = gauss_legendre(64);
        let (t, r, s) = (1.0, 0.3, 0.6);
        let x = [0.2, -0.1];
        let val = rule.apply(-9.0, 9.0, |y1| {
            rule.apply(-9.0, 9.0, |y2| {
                let y = [y1, y2];
                g_tx_eval(t, &x, s, &y).unwrap() * g_tx_eval(t, &x, r, &y).unwrap()
            })
        });
        let exact = pair_integral_white(2, t, r, s).unwrap();
        assert!((val / exact - 1.0).abs() < 1e-12, "{val} {exact}");
    }

    #[test]
    fn g_tx_vanishes_outside_window() {
        assert_eq!(g_tx_eval(1.0, &[0.0], 1.0, &[0.0]).unwrap(), 0.0);
        assert_eq!(g_tx_eval(1.0, &[0.0], -0.1, &[0.0]).unwrap(), 0.0);
        assert!(g_tx_eval(1.0, &[0.0], 0.5, &[0.0]).unwrap() > 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(green_eval(0.0, &[1.0]).is_err());
        assert!(pair_integral_white(1, 1.0, 1.0, 0.0).is_err());
        assert!(SpaceTimePoint::new(-1.0, vec![0.0]).is_err());
        assert!(SpaceTimePoint::new(1.0, vec![]).is_err());
    }
}
