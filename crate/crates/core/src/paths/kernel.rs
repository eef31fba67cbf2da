use super::domain::DomainSpec;
use crate::error::{invalid, Result};
use crate::special::gaussian_kernel;

/// Stopping rule for the image sum of the interval kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Stop once a new shell of terms is below `rel_tol` times the running sum.
    pub rel_tol: f64,
    /// Enforce the minimum shell count derived from the Gaussian tail bound.
    pub floor: bool,
    /// Hard cap on `|k|`.
    pub max_shells: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            rel_tol: 1e-16,
            floor: true,
            max_shells: 100_000,
        }
    }
}

impl Truncation {
    /// Keeps only the `k = 0` shell. Used to check that the validation
    /// suite detects a broken kernel.
    pub fn broken() -> Self {
        Truncation {
            rel_tol: f64::INFINITY,
            floor: false,
            max_shells: 0,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("time must be positive, got {t}"));
    }
    Ok(())
}

/// Image points `z` and weights `G_t(x - z)`. For the interval these are
/// `z in 2bZ +- y`, ordered by shell `|k|`.
pub fn image_terms(domain: &DomainSpec, t: f64, x: f64, y: f64, trunc: Truncation) -> Result<Vec<(f64, f64)>> {
    check_time(t)?;
    Ok(match *domain {
        DomainSpec::FullLine => vec![(y, gaussian_kernel(t, x - y))],
        DomainSpec::HalfLine { .. } => vec![(y, gaussian_kernel(t, x - y)), (-y, gaussian_kernel(t, x + y))],
        DomainSpec::Interval { b, .. } => {
            let period = 2.0 * b;
            let floor = ((x.abs() + y.abs()) / period).ceil() + (6.0 * t.sqrt() / period).ceil();
            let floor = if trunc.floor { floor as usize } else { 0 };
            let mut out = Vec::new();
            let mut sum = 0.0;
            let push = |z: f64, out: &mut Vec<(f64, f64)>| {
                let w = gaussian_kernel(t, x - z);
                out.push((z, w));
                w
            };
            sum += push(y, &mut out);
            if y != 0.0 {
                sum += push(-y, &mut out);
            }
            for k in 1..=trunc.max_shells {
                let s = k as f64 * period;
                let mut shell = 0.0;
                for z in [s + y, s - y, -s + y, -s - y] {
                    shell += push(z, &mut out);
                }
                sum += shell;
                if k >= floor && shell < trunc.rel_tol * sum {
                    break;
                }
            }
            out
        }
    })
}

/// `Pi_Z(t; x, y)` with an explicit truncation rule for the interval.
pub fn transition_kernel_with(domain: &DomainSpec, t: f64, x: f64, y: f64, trunc: Truncation) -> Result<f64> {
    let terms = image_terms(domain, t, x, y, trunc)?;
    // sum small terms first
    let mut w: Vec<f64> = terms.iter().map(|p| p.1).collect();
    w.sort_by(f64::total_cmp);
    Ok(w.iter().sum())
}

/// Transition density of the free, reflected or doubly reflected motion.
pub fn transition_kernel(domain: &DomainSpec, t: f64, x: f64, y: f64) -> Result<f64> {
    transition_kernel_with(domain, t, x, y, Truncation::default())
}
