//! The bump `rho(x) ∝ (1 - x^2)^4` on `[-1, 1]` and its rescalings
//! `rho_eps(x) = rho(x / eps) / eps`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::covariance::CovarianceModel;
use crate::error::{invalid, Result};
use crate::quad::{gauss_legendre_unit, integrate_split, Tolerance};

fn norm_const() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        // degree-8 polynomial: 5 Gauss points are exact
        let (x, w) = gauss_legendre_unit(8);
        let mass: f64 = x.iter().zip(&w).map(|(x, w)| w * (1.0 - x * x).powi(4)).sum();
        1.0 / mass
    })
}

#[inline]
fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        norm_const() * (1.0 - x * x).powi(4)
    }
}

#[inline]
fn bump_derivative(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        -8.0 * norm_const() * x * (1.0 - x * x).powi(3)
    }
}

/// `int_{-1}^{x} rho`.
#[inline]
fn bump_cdf(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let x2 = x * x;
        let p = x * (1.0 + x2 * (-4.0 / 3.0 + x2 * (6.0 / 5.0 + x2 * (-4.0 / 7.0 + x2 / 9.0))));
        0.5 + norm_const() * p
    }
}

/// `(rho * rho)(u)` on `[-2, 2]`.
fn bump_self_convolution(u: f64) -> f64 {
    let u = u.abs();
    if u >= 2.0 {
        return 0.0;
    }
    let (lo, hi) = (u - 1.0, 1.0);
    // integrand is a degree-16 polynomial on the overlap
    let (x, w) = gauss_legendre_unit(9);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    x.iter()
        .zip(&w)
        .map(|(x, w)| {
            let v = mid + half * x;
            w * bump(v) * bump(u - v)
        })
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub epsilon: f64,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        let m = MollifierSpec { epsilon };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return invalid("mollifier width must be > 0");
        }
        Ok(())
    }

    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        bump(x / self.epsilon) / self.epsilon
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        bump_derivative(x / self.epsilon) / (self.epsilon * self.epsilon)
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        bump_cdf(x / self.epsilon)
    }

    /// `(rho_eps * rho_eps)(u)`.
    pub fn self_convolution(&self, u: f64) -> f64 {
        bump_self_convolution(u / self.epsilon) / self.epsilon
    }
}

/// `(gamma * rho_eps^{*2})(lag)`, the covariance of the stationary process
/// `Xi'_eps` at separation `lag`.
pub fn mollified_covariance(cov: &CovarianceModel, epsilon: f64, lag: f64) -> Result<f64> {
    let m = MollifierSpec::new(epsilon)?;
    match cov {
        CovarianceModel::White { variance } => Ok(variance * m.self_convolution(lag)),
        _ => {
            let lo = lag - 2.0 * epsilon;
            let hi = lag + 2.0 * epsilon;
            let tol = Tolerance {
                abs: 1e-12,
                rel: 1e-10,
                max_intervals: 4000,
            };
            let breaks = [0.0, lag];
            let (v, _) = integrate_split(
                |s| {
                    let g = cov.gamma(s).unwrap_or(0.0);
                    if g.is_finite() {
                        g * m.self_convolution(lag - s)
                    } else {
                        0.0
                    }
                },
                lo,
                hi,
                &breaks,
                tol,
            )?;
            Ok(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::Profile;

    #[test]
    fn normalisation_matches_closed_form() {
        assert!((norm_const() - 315.0 / 256.0).abs() < 1e-14);
    }

    #[test]
    fn unit_mass_even_and_compact() {
        for eps in [0.05, 0.1, 0.7] {
            let m = MollifierSpec::new(eps).unwrap();
            let (v, _) = integrate_split(|x| m.density(x), -eps, eps, &[0.0], Tolerance::default()).unwrap();
            assert!((v - 1.0).abs() < 1e-10);
            assert_eq!(m.density(1.0001 * eps), 0.0);
            assert_eq!(m.density(-1.0001 * eps), 0.0);
            for x in [0.1, 0.37, 0.9] {
                assert_eq!(m.density(x * eps), m.density(-x * eps));
            }
            assert!((m.cdf(0.0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_and_derivative_are_consistent() {
        let m = MollifierSpec::new(0.3).unwrap();
        let h = 1e-6;
        for x in [-0.25, -0.1, 0.0, 0.05, 0.2] {
            let fd = (m.cdf(x + h) - m.cdf(x - h)) / (2.0 * h);
            assert!((fd - m.density(x)).abs() < 1e-6);
            let fd2 = (m.density(x + h) - m.density(x - h)) / (2.0 * h);
            assert!((fd2 - m.derivative(x)).abs() < 1e-4);
        }
    }

    #[test]
    fn white_covariance_vanishes_beyond_twice_width() {
        let w = CovarianceModel::white(1.0);
        assert_eq!(mollified_covariance(&w, 0.1, 0.2001).unwrap(), 0.0);
    }

    #[test]
    fn white_covariance_at_zero_matches_fine_riemann_sum() {
        let w = CovarianceModel::white(1.0);
        let eps = 0.1;
        let m = MollifierSpec::new(eps).unwrap();
        // (rho_eps * rho_eps)(0) = int rho_eps^2, midpoint rule at fine resolution
        let n = 200_000;
        let h = 2.0 * eps / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let x = -eps + (i as f64 + 0.5) * h;
                m.density(x).powi(2)
            })
            .sum::<f64>()
            * h;
        let v = mollified_covariance(&w, eps, 0.0).unwrap();
        assert!((v - oracle).abs() < 1e-8 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn constant_covariance_is_preserved() {
        let c = CovarianceModel::constant(2.5);
        for (eps, lag) in [(0.1, 0.0), (0.3, 0.17), (1.0, 5.0)] {
            let v = mollified_covariance(&c, eps, lag).unwrap();
            assert!((v - 2.5).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn mollified_bounded_covariance_tends_to_profile() {
        let c = CovarianceModel::Bounded {
            level: 1.0,
            profile: Profile::Triangle {
                amplitude: 1.0,
                width: 2.0,
            },
        };
        let lag = 0.0;
        let target = c.gamma(lag).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.1, 0.03, 0.01, 0.001] {
            let err = (mollified_covariance(&c, eps, lag).unwrap() - target).abs();
            assert!(err <= last + 1e-15);
            last = err;
        }
        assert!(last < 1e-3);
    }
}
