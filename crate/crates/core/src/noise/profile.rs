//! Even covariance profiles `gamma(x)` for bounded and L^p-singular noises.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use statrs::function::gamma::gamma_li;

use crate::quad::{integrate_split, Tolerance};

/// A parametric, even, positive-semidefinite covariance profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Profile {
    /// `gamma(x) = value`.
    Constant { value: f64 },
    /// `gamma(x) = amplitude * exp(-x^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64 },
    /// `gamma(x) = amplitude * exp(-|x| / length)`.
    Exponential { amplitude: f64, length: f64 },
    /// `gamma(x) = amplitude * max(0, 1 - |x| / width)`.
    Triangle { amplitude: f64, width: f64 },
    /// `gamma(x) = amplitude * cos(frequency * x)`.
    Cosine { amplitude: f64, frequency: f64 },
    /// `gamma(x) = amplitude * |x|^(-exponent) * exp(-|x| / length)`, singular at 0.
    PowerExp { amplitude: f64, exponent: f64, length: f64 },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Profile::Constant { value } => value >= 0.0 && value.is_finite(),
            Profile::Gaussian { amplitude, width } => amplitude >= 0.0 && width > 0.0,
            Profile::Exponential { amplitude, length } => amplitude >= 0.0 && length > 0.0,
            Profile::Triangle { amplitude, width } => amplitude >= 0.0 && width > 0.0,
            Profile::Cosine { amplitude, frequency } => amplitude >= 0.0 && frequency.is_finite(),
            Profile::PowerExp {
                amplitude,
                exponent,
                length,
            } => amplitude >= 0.0 && exponent > 0.0 && exponent < 1.0 && length > 0.0,
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("profile parameters out of range: {self:?}"))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        match *self {
            Profile::Constant { value } => value,
            Profile::Gaussian { amplitude, width } => amplitude * (-a * a / (2.0 * width * width)).exp(),
            Profile::Exponential { amplitude, length } => amplitude * (-a / length).exp(),
            Profile::Triangle { amplitude, width } => amplitude * (1.0 - a / width).max(0.0),
            Profile::Cosine { amplitude, frequency } => amplitude * (frequency * a).cos(),
            Profile::PowerExp {
                amplitude,
                exponent,
                length,
            } => {
                if a == 0.0 {
                    f64::INFINITY
                } else {
                    amplitude * a.powf(-exponent) * (-a / length).exp()
                }
            }
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Profile::PowerExp { .. })
    }

    /// `sup |gamma|`, infinite for singular profiles.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            Profile::Constant { value } => value.abs(),
            Profile::Gaussian { amplitude, .. }
            | Profile::Exponential { amplitude, .. }
            | Profile::Triangle { amplitude, .. }
            | Profile::Cosine { amplitude, .. } => amplitude.abs(),
            Profile::PowerExp { .. } => f64::INFINITY,
        }
    }

    /// `||gamma||_p` when finite.
    pub fn lp_norm(&self, p: f64) -> Option<f64> {
        let v = match *self {
            Profile::Constant { value } => {
                if value == 0.0 {
                    0.0
                } else {
                    return None;
                }
            }
            Profile::Cosine { amplitude, .. } => {
                if amplitude == 0.0 {
                    0.0
                } else {
                    return None;
                }
            }
            Profile::Gaussian { amplitude, width } => {
                amplitude.powf(p) * width * (2.0 * std::f64::consts::PI / p).sqrt()
            }
            Profile::Exponential { amplitude, length } => 2.0 * amplitude.powf(p) * length / p,
            Profile::Triangle { amplitude, width } => 2.0 * amplitude.powf(p) * width / (p + 1.0),
            Profile::PowerExp {
                amplitude,
                exponent,
                length,
            } => {
                let s = 1.0 - exponent * p;
                if s <= 0.0 {
                    return None;
                }
                2.0 * amplitude.powf(p) * libm::tgamma(s) * (length / p).powf(s)
            }
        };
        Some(v.powf(1.0 / p))
    }

    /// Closed form of `F(u) = int_0^|u| (|u| - s) gamma(s) ds` when available.
    pub fn second_antiderivative_closed(&self, u: f64) -> Option<f64> {
        let u = u.abs();
        Some(match *self {
            Profile::Constant { value } => 0.5 * value * u * u,
            Profile::Gaussian { amplitude, width } => {
                let erf = libm::erf(u / (width * std::f64::consts::SQRT_2));
                amplitude
                    * (u * width * (std::f64::consts::PI / 2.0).sqrt() * erf
                        + width * width * ((-u * u / (2.0 * width * width)).exp() - 1.0))
            }
            Profile::Exponential { amplitude, length } => amplitude * length * (u - length * (-(-u / length).exp_m1())),
            Profile::Triangle { amplitude, width } => {
                if u <= width {
                    amplitude * (0.5 * u * u - u * u * u / (6.0 * width))
                } else {
                    amplitude * (width * width / 3.0 + 0.5 * width * (u - width))
                }
            }
            Profile::Cosine { amplitude, frequency } => {
                if frequency == 0.0 {
                    0.5 * amplitude * u * u
                } else {
                    amplitude * (1.0 - (frequency * u).cos()) / (frequency * frequency)
                }
            }
            Profile::PowerExp {
                amplitude,
                exponent,
                length,
            } => {
                if u == 0.0 {
                    return Some(0.0);
                }
                // lower incomplete gammas, with s = length * tau
                let z = u / length;
                let g1 = gamma_li(1.0 - exponent, z);
                let g2 = gamma_li(2.0 - exponent, z);
                amplitude * (u * length.powf(1.0 - exponent) * g1 - length.powf(2.0 - exponent) * g2)
            }
        })
    }

    /// `F(u) = int_0^|u| (|u| - s) gamma(s) ds` by quadrature: the double
    /// integral of `gamma(x - y)` over a pair of intervals reduces to `F`.
    /// The range is split at 1 and graded geometrically towards the origin.
    pub fn second_antiderivative_quad(&self, u: f64) -> Result<f64> {
        let u = u.abs();
        if u == 0.0 {
            return Ok(0.0);
        }
        let near = u.min(1.0);
        let mut breaks: Vec<f64> = (1..30).map(|k| near * 0.5f64.powi(k)).collect();
        breaks.push(1.0);
        let tol = Tolerance {
            abs: 1e-14,
            rel: 1e-11,
            max_intervals: 4000,
        };
        let (v, _) = integrate_split(|s| (u - s) * self.eval(s), 0.0, u, &breaks, tol)?;
        Ok(v)
    }

    pub fn second_antiderivative(&self, u: f64) -> Result<f64> {
        match self.second_antiderivative_closed(u) {
            Some(v) => Ok(v),
            None => self.second_antiderivative_quad(u),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> Vec<Profile> {
        vec![
            Profile::Constant { value: 1.3 },
            Profile::Gaussian {
                amplitude: 2.0,
                width: 0.3,
            },
            Profile::Exponential {
                amplitude: 0.7,
                length: 1.5,
            },
            Profile::Triangle {
                amplitude: 1.1,
                width: 0.8,
            },
            Profile::Cosine {
                amplitude: 0.5,
                frequency: 3.0,
            },
            Profile::PowerExp {
                amplitude: 1.0,
                exponent: 0.4,
                length: 2.0,
            },
        ]
    }

    #[test]
    fn profiles_are_even() {
        for p in all() {
            for x in [0.01, 0.3, 1.0, 2.7, 10.0] {
                assert_eq!(p.eval(x), p.eval(-x), "{p:?}");
            }
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for p in all() {
            for u in [0.05, 0.5, 0.8, 1.0, 2.5, 7.0] {
                let c = p.second_antiderivative_closed(u).unwrap();
                let q = p.second_antiderivative_quad(u).unwrap();
                assert!((c - q).abs() < 1e-9 * (1.0 + c.abs()), "{p:?} u={u}: {c} vs {q}");
            }
        }
    }

    #[test]
    fn power_exp_antiderivative_matches_series() {
        // gamma = |x|^-e exp(-|x|/l): F(u) = sum_k (-1/l)^k / k! * u^(k+2-e) / ((k+1-e)(k+2-e))
        let (e, l) = (0.4, 2.0);
        let p = Profile::PowerExp {
            amplitude: 1.0,
            exponent: e,
            length: l,
        };
        for u in [0.1f64, 0.9, 1.7] {
            let mut s = 0.0;
            let mut fact = 1.0;
            for k in 0..40 {
                if k > 0 {
                    fact *= k as f64;
                }
                let kf = k as f64;
                s += (-1.0 / l).powi(k) / fact * u.powf(kf + 2.0 - e) / ((kf + 1.0 - e) * (kf + 2.0 - e));
            }
            let q = p.second_antiderivative(u).unwrap();
            assert!((q - s).abs() < 1e-9, "u={u}: {q} vs {s}");
        }
    }

    #[test]
    fn lp_norms_match_quadrature() {
        let p = Profile::PowerExp {
            amplitude: 1.5,
            exponent: 0.3,
            length: 1.0,
        };
        let q = 2.0;
        let (v, _) = integrate_split(
            |x: f64| p.eval(x).powf(q),
            0.0,
            60.0,
            &[1e-6, 1e-3, 0.1, 1.0],
            Tolerance::default(),
        )
        .unwrap();
        let want = (2.0 * v).powf(1.0 / q);
        assert!((p.lp_norm(q).unwrap() - want).abs() < 1e-7);
        assert!(Profile::PowerExp {
            amplitude: 1.0,
            exponent: 0.6,
            length: 1.0
        }
        .lp_norm(2.0)
        .is_none());
    }
}
