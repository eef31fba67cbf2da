use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, FieldError, Result};
use crate::feynman_kac::{PotentialSpec, Resolution};
use crate::noise::{CovarianceModel, MollifierSpec};
use crate::paths::DomainSpec;

/// The estimator or check a configuration runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Kernel,
    Trace,
    Spectrum,
    HsNorm,
    Semigroup,
    Laplace,
    OracleEquivalence,
    EpsilonConvergence,
}

impl Operation {
    /// Operations that end in a pass/fail verdict.
    pub fn is_check(self) -> bool {
        matches!(
            self,
            Operation::HsNorm | Operation::Semigroup | Operation::OracleEquivalence | Operation::EpsilonConvergence
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Operation::Kernel => "kernel",
            Operation::Trace => "trace",
            Operation::Spectrum => "spectrum",
            Operation::HsNorm => "hs_norm",
            Operation::Semigroup => "semigroup",
            Operation::Laplace => "laplace",
            Operation::OracleEquivalence => "oracle_equivalence",
            Operation::EpsilonConvergence => "epsilon_convergence",
        }
    }
}

fn default_potential() -> PotentialSpec {
    PotentialSpec::zero()
}

/// Kernel endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Points {
    pub x: f64,
    pub y: f64,
}

/// Monte Carlo and discretization budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    /// Paths per kernel estimate.
    pub paths: u64,
    /// Paths per quadrature node in traces.
    pub paths_per_node: u64,
    pub quadrature_nodes: usize,
    /// Truncation radius on unbounded domains.
    pub radius: Option<f64>,
    /// Noise realizations (Laplace moments and oracle checks).
    pub n_noise: usize,
    pub noise_spacing: f64,
    pub noise_margin: f64,
    /// Grid intervals of the spectral oracle.
    pub grid_intervals: usize,
    pub eigenpairs: usize,
    /// Paths per factor at each node pair of the Hilbert-Schmidt check.
    pub hs_paths_per_pair: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            paths: 10_000,
            paths_per_node: 2000,
            quadrature_nodes: 64,
            radius: None,
            n_noise: 20,
            noise_spacing: 1.0 / 512.0,
            noise_margin: 0.5,
            grid_intervals: 2000,
            eigenpairs: 40,
            hs_paths_per_pair: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// One experiment, read from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operation: Operation,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSpec,
    #[serde(default = "default_potential")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub covariance: Option<CovarianceModel>,
    #[serde(default)]
    pub mollifier: Option<MollifierSpec>,
    /// Time points; the semigroup check reads `[t, tbar]`.
    pub times: Vec<f64>,
    #[serde(default)]
    pub points: Option<Points>,
    /// Mollifier widths of the convergence check.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub resolution: Resolution,
    #[serde(default)]
    pub output: Output,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// The configuration as JSON with sorted keys.
    pub fn canonical_json(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&v)?)
    }

    /// SHA-256 of [`canonical_json`](Self::canonical_json), in hex.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical_json()?.as_bytes())))
    }

    /// Every violated invariant, keyed by its field path.
    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut out = self.domain.field_errors("domain.");
        out.extend(self.potential.field_errors(&self.domain, "potential."));
        if let Some(c) = &self.covariance {
            if let Err(e) = c.validate() {
                out.push(FieldError::new("covariance", e.to_string()));
            }
        }
        if let Some(m) = &self.mollifier {
            if m.validate().is_err() {
                out.push(FieldError::new("mollifier.epsilon", "must be positive and finite"));
            }
        }
        if self.times.is_empty() {
            out.push(FieldError::new("times", "at least one time is required"));
        }
        for (i, t) in self.times.iter().enumerate() {
            if !(*t > 0.0 && t.is_finite()) {
                out.push(FieldError::new(format!("times[{i}]"), "must be positive and finite"));
            }
        }
        for (i, e) in self.epsilons.iter().enumerate() {
            if !(*e > 0.0 && e.is_finite()) {
                out.push(FieldError::new(format!("epsilons[{i}]"), "must be positive and finite"));
            }
        }
        self.budget_errors(&mut out);
        self.operation_errors(&mut out);
        out
    }

    fn budget_errors(&self, out: &mut Vec<FieldError>) {
        let b = &self.budget;
        let mut need = |ok: bool, field: &str, msg: &str| {
            if !ok {
                out.push(FieldError::new(format!("budget.{field}"), msg));
            }
        };
        need(b.paths > 0, "paths", "must be positive");
        need(b.paths_per_node > 0, "paths_per_node", "must be positive");
        need(b.quadrature_nodes > 0, "quadrature_nodes", "must be positive");
        need(b.n_noise > 0, "n_noise", "must be positive");
        need(
            b.noise_spacing > 0.0 && b.noise_spacing.is_finite(),
            "noise_spacing",
            "must be positive",
        );
        need(
            b.noise_margin >= 0.0 && b.noise_margin.is_finite(),
            "noise_margin",
            "must be nonnegative",
        );
        need(
            b.grid_intervals >= crate::spectral::MIN_INTERVALS,
            "grid_intervals",
            "must be at least 16",
        );
        need(
            b.eigenpairs > 0 && b.eigenpairs <= b.grid_intervals / 4,
            "eigenpairs",
            "must be in 1..=grid_intervals/4",
        );
        need(b.hs_paths_per_pair > 0, "hs_paths_per_pair", "must be positive");
        if let Some(r) = b.radius {
            need(r > 0.0 && r.is_finite(), "radius", "must be positive");
        } else {
            let needs_radius = !matches!(self.operation, Operation::Kernel | Operation::Semigroup);
            need(
                self.domain.is_bounded() || !needs_radius,
                "radius",
                "required on unbounded domains",
            );
        }
        let r = &self.resolution;
        if r.n_steps.is_some_and(|n| n < 2) {
            out.push(FieldError::new("resolution.n_steps", "must be at least 2"));
        }
        if r.bin_width.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
            out.push(FieldError::new("resolution.bin_width", "must be positive"));
        }
        if r.boundary_window.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
            out.push(FieldError::new("resolution.boundary_window", "must be positive"));
        }
    }

    fn operation_errors(&self, out: &mut Vec<FieldError>) {
        match self.operation {
            Operation::Kernel | Operation::Semigroup => match &self.points {
                None => out.push(FieldError::new("points", "kernel endpoints are required")),
                Some(p) => {
                    if !self.domain.contains_closed(p.x) {
                        out.push(FieldError::new("points.x", "must lie in the domain"));
                    }
                    if !self.domain.contains_closed(p.y) {
                        out.push(FieldError::new("points.y", "must lie in the domain"));
                    }
                }
            },
            _ => {}
        }
        if self.operation == Operation::Semigroup && self.times.len() != 2 {
            out.push(FieldError::new("times", "the semigroup check needs [t, tbar]"));
        }
        if self.operation == Operation::HsNorm && self.budget.quadrature_nodes < crate::feynman_kac::MIN_HS_NODES {
            out.push(FieldError::new(
                "budget.quadrature_nodes",
                "the Hilbert-Schmidt check needs at least 8 nodes",
            ));
        }
        if self.operation == Operation::EpsilonConvergence {
            if self.covariance.is_none() {
                out.push(FieldError::new("covariance", "required by the convergence check"));
            }
            if self.epsilons.is_empty() {
                out.push(FieldError::new("epsilons", "at least one mollifier width is required"));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.field_errors();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOX: &str = r#"
operation = "trace"
seed = 7
times = [0.5]
[domain]
case = "interval"
b = 1.0
bc0 = "dirichlet"
bcb = "dirichlet"
"#;

    #[test]
    fn parses_and_digests_stably() {
        let c = ExperimentConfig::from_toml(BOX).unwrap();
        c.validate().unwrap();
        assert_eq!(c.digest().unwrap(), c.digest().unwrap());
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back.digest().unwrap(), c.digest().unwrap());
        let mut d = c.clone();
        d.seed = 8;
        assert_ne!(d.digest().unwrap(), c.digest().unwrap());
    }

    #[test]
    fn negative_length_is_reported_by_path() {
        let c = ExperimentConfig::from_toml(&BOX.replace("b = 1.0", "b = -1.0")).unwrap();
        match c.validate() {
            Err(Error::Validation(errs)) => assert!(errs.iter().any(|e| e.path == "domain.b")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{BOX}\nbogus = 1\n")).is_err());
    }
}
