use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::paths::{default_bin_width, default_steps, BoundaryRule, LocalTimeSpec};
use crate::quad::gauss_legendre;

/// Time and space resolution of the path discretization. Unset fields take
/// the defaults: `ceil(2048 t)` steps, bin width `10 dt / sqrt(t)` and a
/// boundary window equal to the bin width.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    #[serde(default)]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub bin_width: Option<f64>,
    #[serde(default)]
    pub boundary_window: Option<f64>,
    #[serde(default)]
    pub boundary_rule: BoundaryRule,
}

impl Resolution {
    pub fn with_steps(n_steps: usize) -> Self {
        Resolution {
            n_steps: Some(n_steps),
            ..Default::default()
        }
    }

    pub fn resolve(&self, t: f64) -> Result<(usize, LocalTimeSpec)> {
        let n = self.n_steps.unwrap_or_else(|| default_steps(t));
        if n < 2 {
            return invalid("n_steps must be at least 2");
        }
        let w = self.bin_width.unwrap_or_else(|| default_bin_width(t, n));
        if !(w > 0.0 && w.is_finite()) {
            return invalid("bin width must be positive");
        }
        if let Some(e) = self.boundary_window {
            if !(e > 0.0 && e.is_finite()) {
                return invalid("boundary window must be positive");
            }
        }
        Ok((
            n,
            LocalTimeSpec {
                bin_width: w,
                boundary_window: self.boundary_window,
                boundary_rule: self.boundary_rule,
            },
        ))
    }
}

/// Certificate that truncating an unbounded domain at `radius` loses a
/// negligible part of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCertificate {
    pub radius: f64,
    /// `Pi(t; R, R) exp(-t inf_{|x| >= R} V)`.
    pub tail_bound: f64,
    /// `tail_bound / |estimate|`, required below `1e-3`.
    pub ratio: f64,
}

/// A Monte Carlo estimate with its resolution metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicates: u64,
    pub discarded: u64,
    pub n_steps: usize,
    pub bin_width: f64,
    pub boundary_window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationCertificate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl KernelEstimate {
    pub(crate) fn exact(value: f64, n_steps: usize, spec: &LocalTimeSpec) -> Self {
        KernelEstimate {
            mean: value,
            stderr: 0.0,
            replicates: 0,
            discarded: 0,
            n_steps,
            bin_width: spec.bin_width,
            boundary_window: spec.window(),
            truncation: None,
            warnings: Vec::new(),
        }
    }

    /// Number of standard errors between the estimate and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target) / self.stderr
        }
    }
}

/// `sqrt(se_a^2 + se_b^2)` for independent estimates.
pub fn joint_stderr(a: &KernelEstimate, b: &KernelEstimate) -> f64 {
    a.stderr.hypot(b.stderr)
}

/// Several estimates computed on the same sampled paths, with the
/// covariance matrix of their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiEstimate {
    pub estimates: Vec<KernelEstimate>,
    /// Row-major `k x k` covariance of the means.
    pub covariance: Vec<f64>,
}

impl MultiEstimate {
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * self.len() + j]
    }

    /// Mean and standard error of `estimate_i - estimate_j` (paired).
    pub fn difference(&self, i: usize, j: usize) -> (f64, f64) {
        let var = self.covariance(i, i) + self.covariance(j, j) - 2.0 * self.covariance(i, j);
        (self.estimates[i].mean - self.estimates[j].mean, var.max(0.0).sqrt())
    }
}

/// Streaming mean and co-moment of a vector of weights.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Moments {
    pub n: u64,
    pub mean: Vec<f64>,
    pub comoment: Vec<f64>,
}

impl Moments {
    pub fn new(k: usize) -> Self {
        Moments {
            n: 0,
            mean: vec![0.0; k],
            comoment: vec![0.0; k * k],
        }
    }

    pub fn push(&mut self, w: &[f64]) {
        let k = self.mean.len();
        self.n += 1;
        let n = self.n as f64;
        if k == 1 {
            let d = w[0] - self.mean[0];
            self.mean[0] += d / n;
            self.comoment[0] += d * (w[0] - self.mean[0]);
            return;
        }
        let delta: Vec<f64> = (0..k).map(|i| w[i] - self.mean[i]).collect();
        for i in 0..k {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..k {
            for j in 0..k {
                self.comoment[i * k + j] += delta[i] * (w[j] - self.mean[j]);
            }
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let k = self.mean.len();
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..k).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..k {
            for j in 0..k {
                self.comoment[i * k + j] += other.comoment[i * k + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..k {
            self.mean[i] += delta[i] * nb / n;
        }
        self.n += other.n;
    }

    /// Covariance of the sample means.
    pub fn mean_covariance(&self, i: usize, j: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let k = self.mean.len();
        self.comoment[i * k + j] / ((self.n - 1) as f64 * self.n as f64)
    }
}

/// Nodes and weights for integrating over (a truncation of) the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// The interval the rule integrates over.
    pub interval: (f64, f64),
}

impl QuadratureSpec {
    pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 || !(hi > lo) {
            return invalid("quadrature needs at least one node and lo < hi");
        }
        let (nodes, weights) = gauss_legendre(n, lo, hi);
        Ok(QuadratureSpec {
            nodes,
            weights,
            interval: (lo, hi),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.interval.0.abs().max(self.interval.1.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_single_pass() {
        let data: Vec<[f64; 2]> = (0..50)
            .map(|i| [(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let mut all = Moments::new(2);
        for d in &data {
            all.push(d);
        }
        let mut a = Moments::new(2);
        let mut b = Moments::new(2);
        for d in &data[..17] {
            a.push(d);
        }
        for d in &data[17..] {
            b.push(d);
        }
        a.merge(&b);
        for i in 0..2 {
            assert!((a.mean[i] - all.mean[i]).abs() < 1e-14);
        }
        for i in 0..4 {
            assert!((a.comoment[i] - all.comoment[i]).abs() < 1e-12);
        }
        // direct sample covariance
        let m0 = data.iter().map(|d| d[0]).sum::<f64>() / 50.0;
        let m1 = data.iter().map(|d| d[1]).sum::<f64>() / 50.0;
        let c01 = data.iter().map(|d| (d[0] - m0) * (d[1] - m1)).sum::<f64>() / 49.0 / 50.0;
        assert!((all.mean_covariance(0, 1) - c01).abs() < 1e-14);
    }

    #[test]
    fn constant_weights_have_zero_spread() {
        let mut m = Moments::new(1);
        for _ in 0..1000 {
            m.push(&[1.0]);
        }
        assert_eq!(m.mean[0], 1.0);
        assert_eq!(m.mean_covariance(0, 0), 0.0);
    }

    #[test]
    fn default_resolution() {
        let (n, spec) = Resolution::default().resolve(0.5).unwrap();
        assert_eq!(n, 1024);
        assert!((spec.bin_width - 10.0 * (0.5 / 1024.0) / 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(spec.window(), spec.bin_width);
        assert!(Resolution::with_steps(1).resolve(1.0).is_err());
    }
}
