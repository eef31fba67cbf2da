use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::feynman_kac::KernelEstimate;

/// Discretization metadata of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRecord {
    pub n_steps: usize,
    pub bin_width: f64,
    pub boundary_window: f64,
}

/// One estimated number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub operation: String,
    pub label: String,
    pub inputs_digest: String,
    pub mean: f64,
    pub stderr: f64,
    pub replicates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<ResolutionRecord>,
    pub seed: u64,
}

impl Record {
    pub fn from_estimate(operation: &str, label: &str, digest: &str, seed: u64, e: &KernelEstimate) -> Self {
        Record {
            operation: operation.into(),
            label: label.into(),
            inputs_digest: digest.into(),
            mean: e.mean,
            stderr: e.stderr,
            replicates: e.replicates,
            resolution: Some(ResolutionRecord {
                n_steps: e.n_steps,
                bin_width: e.bin_width,
                boundary_window: e.boundary_window,
            }),
            seed,
        }
    }

    pub fn value(operation: &str, label: &str, digest: &str, seed: u64, value: f64) -> Self {
        Record {
            operation: operation.into(),
            label: label.into(),
            inputs_digest: digest.into(),
            mean: value,
            stderr: 0.0,
            replicates: 0,
            resolution: None,
            seed,
        }
    }
}

/// The outcome of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub expected: f64,
    /// Error bar of `observed - expected` (0 for exact checks).
    pub stderr: f64,
    pub detail: String,
}

impl Verdict {
    /// `|observed - expected| <= tol`.
    pub fn exact(name: &str, observed: f64, expected: f64, tol: f64) -> Self {
        let err = (observed - expected).abs();
        Verdict {
            name: name.into(),
            pass: err <= tol,
            observed,
            expected,
            stderr: 0.0,
            detail: format!("|difference| = {err:.3e}, tolerance {tol:.1e}"),
        }
    }

    /// `|observed - expected| <= k * stderr`.
    pub fn statistical(name: &str, observed: f64, expected: f64, stderr: f64, k: f64) -> Self {
        let z = (observed - expected).abs() / stderr;
        Verdict {
            name: name.into(),
            pass: z <= k,
            observed,
            expected,
            stderr,
            detail: format!("{z:.2} standard errors, limit {k}"),
        }
    }

    pub fn flag(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            pass,
            observed: f64::from(u8::from(pass)),
            expected: 1.0,
            stderr: 0.0,
            detail: detail.into(),
        }
    }

    pub fn with_detail(mut self, extra: &str) -> Self {
        self.detail = format!("{}; {extra}", self.detail);
        self
    }

    /// `PASS name: detail` or `FAIL ...`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: observed {:.6} expected {:.6} (+- {:.2e}); {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.expected,
            self.stderr,
            self.detail
        )
    }
}

/// The deterministic part of a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub records: Vec<Record>,
    pub verdicts: Vec<Verdict>,
    pub discarded: u64,
    pub warnings: Vec<String>,
    /// Operation-specific structured output.
    #[serde(default)]
    pub detail: serde_json::Value,
}

impl Payload {
    pub fn push_estimate(&mut self, r: Record, e: &KernelEstimate) {
        self.discarded += e.discarded;
        for w in &e.warnings {
            if !self.warnings.contains(w) {
                self.warnings.push(w.clone());
            }
        }
        self.records.push(r);
    }

    pub fn digest(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        Ok(hex::encode(Sha256::digest(serde_json::to_string(&v)?.as_bytes())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub operation: String,
    pub config_digest: String,
    pub seed: u64,
    pub payload: Payload,
    pub payload_digest: String,
    pub wall_time_s: f64,
    /// Extra CSV tables `(file name, contents)` written next to the report.
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.payload.verdicts.iter().all(|v| v.pass)
    }

    /// Flat CSV of the records.
    pub fn write_records_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "operation,label,mean,stderr,replicates,n_steps,bin_width,seed")?;
        for r in &self.payload.records {
            let (n, bw) = r.resolution.map_or((String::new(), String::new()), |x| {
                (x.n_steps.to_string(), x.bin_width.to_string())
            });
            writeln!(
                w,
                "{},{},{},{},{},{n},{bw},{}",
                r.operation, r.label, r.mean, r.stderr, r.replicates, r.seed
            )?;
        }
        Ok(())
    }

    /// Writes `report.json` and `records.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(self)?.as_bytes())?;
        let mut csv = Vec::new();
        self.write_records_csv(&mut csv)?;
        write_atomic(&dir.join("records.csv"), &csv)?;
        for (name, body) in &self.tables {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        Ok(())
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
