use serde::{Deserialize, Serialize};

use super::profile::Profile;
use crate::error::{invalid, Result};
use crate::stochint::StepFunction;

/// One `gamma_i in L^{p_i}` piece of an L^p-singular covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularComponent {
    pub exponent: f64,
    pub profile: Profile,
}

/// The law of the noise: the covariance `gamma` of `xi = Xi'`.
///
/// Serialized as `{"kind": ..., "parameters": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum CovarianceModel {
    /// `gamma` a bounded function with `sup |gamma| <= level`.
    Bounded { level: f64, profile: Profile },
    /// `gamma = variance * delta_0`.
    White { variance: f64 },
    /// `gamma(x) = variance * H (2H - 1) |x|^(2H - 2)`.
    Fractional { variance: f64, hurst: f64 },
    /// `gamma = sum_i gamma_i + gamma_inf` with `gamma_i in L^{p_i}`.
    LpSingular {
        components: Vec<SingularComponent>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounded: Option<Profile>,
    },
}

/// Constants `c_gamma` and `q_1..q_l` with
/// `||f||_gamma^2 <= c_gamma * sum_i ||f||_{q_i}^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormBound {
    pub c_gamma: f64,
    pub exponents: Vec<f64>,
}

impl CovarianceModel {
    pub fn white(variance: f64) -> Self {
        CovarianceModel::White { variance }
    }

    pub fn fractional(variance: f64, hurst: f64) -> Self {
        CovarianceModel::Fractional { variance, hurst }
    }

    pub fn constant(level: f64) -> Self {
        CovarianceModel::Bounded {
            level,
            profile: Profile::Constant { value: level },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceModel::Bounded { level, profile } => {
                profile.validate()?;
                if profile.is_singular() {
                    return invalid("bounded noise requires a bounded profile");
                }
                if !(*level >= 0.0) || profile.sup_norm() > *level * (1.0 + 1e-12) {
                    return invalid(format!(
                        "bounded level {level} must be >= 0 and dominate sup|gamma| = {}",
                        profile.sup_norm()
                    ));
                }
            }
            CovarianceModel::White { variance } => {
                if !(*variance > 0.0) || !variance.is_finite() {
                    return invalid("white noise variance must be > 0");
                }
            }
            CovarianceModel::Fractional { variance, hurst } => {
                if !(*variance > 0.0) || !variance.is_finite() {
                    return invalid("fractional noise variance must be > 0");
                }
                if !(*hurst > 0.5 && *hurst < 1.0) {
                    return invalid("Hurst parameter must lie strictly inside (1/2, 1)");
                }
            }
            CovarianceModel::LpSingular { components, bounded } => {
                for c in components {
                    c.profile.validate()?;
                    if !(c.exponent >= 1.0) {
                        return invalid("singular component exponent p must be >= 1");
                    }
                    if c.profile.lp_norm(c.exponent).is_none() {
                        return invalid(format!("profile {:?} is not in L^{}", c.profile, c.exponent));
                    }
                }
                if let Some(b) = bounded {
                    b.validate()?;
                    if b.is_singular() {
                        return invalid("bounded part of an L^p-singular noise must be bounded");
                    }
                }
            }
        }
        Ok(())
    }

    /// `F(u) = int_0^|u| (|u| - s) gamma(s) ds`, half the variance of `Xi(u)`.
    pub fn half_variance(&self, u: f64) -> Result<f64> {
        let a = u.abs();
        Ok(match self {
            CovarianceModel::White { variance } => 0.5 * variance * a,
            CovarianceModel::Fractional { variance, hurst } => 0.5 * variance * a.powf(2.0 * hurst),
            CovarianceModel::Bounded { profile, .. } => profile.second_antiderivative(a)?,
            CovarianceModel::LpSingular { components, bounded } => {
                let mut s = 0.0;
                for c in components {
                    s += c.profile.second_antiderivative(a)?;
                }
                if let Some(b) = bounded {
                    s += b.second_antiderivative(a)?;
                }
                s
            }
        })
    }

    /// Evaluates `gamma(x)` where it is a function (not for white noise).
    pub fn gamma(&self, x: f64) -> Option<f64> {
        match self {
            CovarianceModel::White { .. } => None,
            CovarianceModel::Fractional { variance, hurst } => {
                Some(variance * hurst * (2.0 * hurst - 1.0) * x.abs().powf(2.0 * hurst - 2.0))
            }
            CovarianceModel::Bounded { profile, .. } => Some(profile.eval(x)),
            CovarianceModel::LpSingular { components, bounded } => Some(
                components.iter().map(|c| c.profile.eval(x)).sum::<f64>() + bounded.as_ref().map_or(0.0, |b| b.eval(x)),
            ),
        }
    }

    /// `<1_[a,b), 1_[c,d)>_gamma = F(b-c) - F(b-d) - F(a-c) + F(a-d)`.
    pub fn interval_inner(&self, a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
        if let CovarianceModel::White { variance } = self {
            let overlap = (b.min(d) - a.max(c)).max(0.0);
            return Ok(variance * overlap);
        }
        Ok(
            self.half_variance(b - c)? - self.half_variance(b - d)? - self.half_variance(a - c)?
                + self.half_variance(a - d)?,
        )
    }

    /// The semi-inner-product `<f, g>_gamma` of two step functions.
    ///
    /// Writing `f = sum_k d_k 1_[x_k, inf)` by its jumps gives
    /// `<f, g> = -sum_{k,l} d_k e_l F(x_k - y_l)`; white noise uses the
    /// `L^2` product directly.
    pub fn gamma_inner(&self, f: &StepFunction, g: &StepFunction) -> Result<f64> {
        if let CovarianceModel::White { variance } = self {
            return Ok(variance * l2_inner(f, g));
        }
        let jf = jumps(f);
        let jg = jumps(g);
        let mut s = 0.0;
        for &(x, d) in &jf {
            let mut row = 0.0;
            for &(y, e) in &jg {
                row += e * self.half_variance(x - y)?;
            }
            s -= d * row;
        }
        Ok(s)
    }

    pub fn seminorm_bound(&self) -> SeminormBound {
        match self {
            CovarianceModel::Bounded { level, .. } => SeminormBound {
                c_gamma: *level,
                exponents: vec![1.0],
            },
            CovarianceModel::White { variance } => SeminormBound {
                c_gamma: *variance,
                exponents: vec![2.0],
            },
            CovarianceModel::Fractional { variance, hurst } => {
                // near-diagonal part: sigma^2 H (2H-1) * int_{-1}^{1} |a|^{2H-2} da = 2 sigma^2 H
                let near = 2.0 * variance * hurst;
                let far = variance * hurst * (2.0 * hurst - 1.0);
                SeminormBound {
                    c_gamma: near.max(far),
                    exponents: vec![2.0, 1.0],
                }
            }
            CovarianceModel::LpSingular { components, bounded } => {
                let mut c = bounded.as_ref().map_or(0.0, |b| b.sup_norm());
                let mut exponents = Vec::with_capacity(components.len() + 1);
                for comp in components {
                    c = c.max(comp.profile.lp_norm(comp.exponent).unwrap_or(f64::INFINITY));
                    exponents.push(1.0 / (1.0 - 0.5 / comp.exponent));
                }
                exponents.push(1.0);
                SeminormBound { c_gamma: c, exponents }
            }
        }
    }
}

fn jumps(f: &StepFunction) -> Vec<(f64, f64)> {
    let c = f.levels();
    let b = f.breakpoints();
    let mut out = Vec::with_capacity(b.len());
    let mut prev = 0.0;
    for (i, &x) in b.iter().enumerate() {
        let next = c.get(i).copied().unwrap_or(0.0);
        if next != prev {
            out.push((x, next - prev));
        }
        prev = next;
    }
    out
}

fn l2_inner(f: &StepFunction, g: &StepFunction) -> f64 {
    let (bf, cf) = (f.breakpoints(), f.levels());
    let (bg, cg) = (g.breakpoints(), g.levels());
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    while i < cf.len() && j < cg.len() {
        let lo = bf[i].max(bg[j]);
        let hi = bf[i + 1].min(bg[j + 1]);
        if hi > lo {
            s += cf[i] * cg[j] * (hi - lo);
        }
        if bf[i + 1] <= bg[j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    s
}

/// `||f||_gamma^2`, the variance of `sum_i c_i (Xi(x_{i+1}) - Xi(x_i))`.
pub fn gamma_seminorm_sq(f: &StepFunction, cov: &CovarianceModel) -> Result<f64> {
    Ok(cov.gamma_inner(f, f)?.max(0.0))
}

/// `E[Xi(x) Xi(y)]`, from the indicator pair matching the signs of `x`, `y`.
pub fn xi_covariance(x: f64, y: f64, cov: &CovarianceModel) -> Result<f64> {
    // canonical order so that the result is exactly symmetric
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    if x == 0.0 || y == 0.0 {
        return Ok(0.0);
    }
    // signed indicator of [0, x) or -[x, 0)
    let ind = |z: f64| if z > 0.0 { (0.0, z, 1.0) } else { (z, 0.0, -1.0) };
    let (a, b, s) = ind(x);
    let (c, d, r) = ind(y);
    Ok(s * r * cov.interval_inner(a, b, c, d)?)
}
