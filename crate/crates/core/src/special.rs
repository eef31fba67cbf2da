//! Gaussian densities and tail functions.

use std::f64::consts::PI;

/// Heat kernel `exp(-x^2 / 2t) / sqrt(2 pi t)`.
#[inline]
pub fn gaussian_kernel(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Scaled complementary error function `exp(z^2) erfc(z)` for `z >= 0`.
pub fn erfcx(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 25.0 {
        (z * z).exp() * libm::erfc(z)
    } else {
        // asymptotic series, ample at z >= 25
        let z2 = z * z;
        let inv = 1.0 / (2.0 * z2);
        (1.0 - inv + 3.0 * inv * inv - 15.0 * inv * inv * inv) / (z * PI.sqrt())
    }
}
