use std::time::Instant;

use super::config::{ExperimentConfig, Operation};
use super::report::{Payload, Record, RunReport, Verdict};
use crate::error::{invalid, Result};
use crate::feynman_kac::{
    hs_norm_check, kernel_many, laplace_transform_moment, semigroup_check, trace_many, CenterTable, HsBudget,
    NoiseSetup, NoiseTerm, QuadratureSpec, Stream, Weighting,
};
use crate::noise::{mollified_derivative, sample_noise_path, uniform_grid, GridNoisePath};
use crate::paths::DomainSpec;
use crate::rng::{derive_seed, substream, tags};
use crate::spectral::{
    discretize_form, eigen_solve, epsilon_convergence, form_grid, oracle_equivalence, spectral_trace, FormNoise,
    OracleBudget,
};

/// Agreement threshold of the identity checks, in joint standard errors.
pub const IDENTITY_SIGMAS: f64 = 3.0;
/// The same threshold with a fixed noise realization.
pub const NOISY_IDENTITY_SIGMAS: f64 = 4.0;

impl ExperimentConfig {
    pub(crate) fn oracle_budget(&self) -> OracleBudget {
        let b = &self.budget;
        OracleBudget {
            grid_intervals: b.grid_intervals,
            eigenpairs: b.eigenpairs,
            quadrature_nodes: b.quadrature_nodes,
            paths_per_node: b.paths_per_node,
            noise_spacing: b.noise_spacing,
            noise_margin: b.noise_margin,
            radius: b.radius,
            resolution: self.resolution,
        }
    }

    /// The interval traces integrate over: the domain or its truncation.
    fn bounds(&self) -> Result<(f64, f64)> {
        let g = form_grid(&self.domain, 16, self.budget.radius)?;
        Ok((g[0], g[16]))
    }

    /// Span of the sampled noise: the traced region, or the region kernel
    /// paths reach with overwhelming probability, plus the margin.
    fn noise_span(&self) -> Result<(f64, f64)> {
        let m = self.budget.noise_margin;
        let (lo, hi) = match (&self.domain, self.budget.radius, &self.points) {
            (DomainSpec::Interval { b, .. }, _, _) => (0.0, *b),
            (_, Some(_), _) => self.bounds()?,
            (d, None, Some(p)) => {
                let reach = 8.0 * self.times.iter().cloned().fold(0.0, f64::max).sqrt();
                let lo = p.x.min(p.y) - reach;
                let lo = if matches!(d, DomainSpec::HalfLine { .. }) {
                    0.0
                } else {
                    lo
                };
                (lo, p.x.max(p.y) + reach)
            }
            _ => return invalid("a truncation radius is required on unbounded domains"),
        };
        Ok((lo.min(0.0) - m, hi.max(0.0) + m))
    }

    fn sample_noise(&self) -> Result<Option<GridNoisePath>> {
        let Some(cov) = &self.covariance else {
            return Ok(None);
        };
        let (lo, hi) = self.noise_span()?;
        let grid = uniform_grid(lo, hi, self.budget.noise_spacing)?;
        let path = sample_noise_path(cov, &grid, &mut substream(self.seed, &[tags::NOISE, 0]))?;
        Ok(Some(path))
    }

    fn quadrature(&self) -> Result<QuadratureSpec> {
        let (lo, hi) = self.bounds()?;
        QuadratureSpec::gauss_legendre(self.budget.quadrature_nodes, lo, hi)
    }
}

/// Runs `config` and returns its report. Identical configurations give
/// identical payloads whatever the number of worker threads.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let digest = config.digest()?;
    let mut tables = Vec::new();
    let payload = dispatch(config, &digest, &mut tables)?;
    let payload_digest = payload.digest()?;
    let wall = start.elapsed().as_secs_f64();
    log::info!("{} finished in {wall:.2} s", config.operation.name());
    Ok(RunReport {
        operation: config.operation.name().into(),
        config_digest: digest,
        seed: config.seed,
        payload,
        payload_digest,
        wall_time_s: wall,
        tables,
    })
}

fn dispatch(c: &ExperimentConfig, digest: &str, tables: &mut Vec<(String, String)>) -> Result<Payload> {
    let op = c.operation.name();
    let mut out = Payload::default();
    let noise = c.sample_noise()?;
    let t0 = c.times[0];
    let center_table = |t: f64| -> Result<Option<CenterTable>> {
        match (&noise, &c.mollifier) {
            (Some(p), Some(m)) => {
                let (_, spec) = c.resolution.resolve(t)?;
                Ok(Some(CenterTable::build(p, m, &c.domain, spec.bin_width)?))
            }
            _ => Ok(None),
        }
    };
    match c.operation {
        Operation::Kernel => {
            let p = c.points.as_ref().expect("validated");
            for (i, &t) in c.times.iter().enumerate() {
                let table = center_table(t)?;
                let w = [Weighting::new(&c.potential, noise_term(noise.as_ref(), table.as_ref()))];
                let stream = Stream::new(c.seed, &[tags::KERNEL]).child(i as u64);
                let e = kernel_many(&c.domain, &w, t, p.x, p.y, c.budget.paths, &c.resolution, &stream)?
                    .estimates
                    .remove(0);
                out.push_estimate(Record::from_estimate(op, &format!("t={t}"), digest, c.seed, &e), &e);
            }
        }
        Operation::Trace => {
            let quad = c.quadrature()?;
            for (i, &t) in c.times.iter().enumerate() {
                let table = center_table(t)?;
                let w = [Weighting::new(&c.potential, noise_term(noise.as_ref(), table.as_ref()))];
                let stream = Stream::new(c.seed, &[tags::TRACE]).child(i as u64);
                let e = trace_many(&c.domain, &w, t, &quad, c.budget.paths_per_node, &c.resolution, &stream)?
                    .estimates
                    .remove(0);
                out.push_estimate(Record::from_estimate(op, &format!("t={t}"), digest, c.seed, &e), &e);
            }
        }
        Operation::Spectrum => {
            let grid = form_grid(&c.domain, c.budget.grid_intervals, c.budget.radius)?;
            let nodal = match (&noise, &c.mollifier) {
                (Some(p), Some(m)) => Some(mollified_derivative(p, m, &grid)?),
                _ => None,
            };
            let fnoise = match (&noise, &nodal) {
                (_, Some(q)) => FormNoise::Nodes(q),
                (Some(p), None) => FormNoise::Raw(p),
                (None, None) => FormNoise::None,
            };
            let form = discretize_form(
                &c.domain,
                &c.potential,
                fnoise,
                c.budget.grid_intervals,
                c.budget.radius,
            )?;
            let result = eigen_solve(&form, c.budget.eigenpairs)?;
            for (k, l) in result.eigenvalues.iter().enumerate() {
                out.records
                    .push(Record::value(op, &format!("lambda_{}", k + 1), digest, c.seed, *l));
            }
            for &t in &c.times {
                let tr = spectral_trace(&result, t, c.budget.eigenpairs)?;
                if !tr.reliable {
                    out.warnings
                        .push(format!("spectral trace at t={t} has tail {:e}", tr.tail));
                }
                out.records
                    .push(Record::value(op, &format!("trace t={t}"), digest, c.seed, tr.value));
            }
            let mut csv = Vec::new();
            result.write_csv(&mut csv)?;
            tables.push(("spectrum.csv".into(), String::from_utf8_lossy(&csv).into_owned()));
        }
        Operation::HsNorm => {
            let table = center_table(t0)?;
            let budget = HsBudget {
                paths_per_pair: c.budget.hs_paths_per_pair,
                trace_paths_per_node: c.budget.paths_per_node,
            };
            let chk = hs_norm_check(
                &c.domain,
                &c.potential,
                noise_term(noise.as_ref(), table.as_ref()),
                t0,
                &c.quadrature()?,
                &budget,
                &c.resolution,
                c.seed,
            )?;
            out.push_estimate(
                Record::from_estimate(op, "hs_norm_squared(t/2)", digest, c.seed, &chk.left),
                &chk.left,
            );
            out.push_estimate(
                Record::from_estimate(op, "trace(t)", digest, c.seed, &chk.right),
                &chk.right,
            );
            out.verdicts.push(identity_verdict(
                "trace equals squared Hilbert-Schmidt norm",
                &chk,
                noise.is_some(),
            ));
        }
        Operation::Semigroup => {
            let p = c.points.as_ref().expect("validated");
            let (t, tbar) = (c.times[0], c.times[1]);
            let table = center_table(t.min(tbar))?;
            let zquad = if c.domain.is_bounded() || c.budget.radius.is_some() {
                c.quadrature()?
            } else {
                let reach = 8.0 * (t + tbar).sqrt();
                let lo = p.x.min(p.y) - reach;
                let lo = if matches!(c.domain, DomainSpec::HalfLine { .. }) {
                    lo.max(0.0)
                } else {
                    lo
                };
                QuadratureSpec::gauss_legendre(c.budget.quadrature_nodes, lo, p.x.max(p.y) + reach)?
            };
            let chk = semigroup_check(
                &c.domain,
                &c.potential,
                noise_term(noise.as_ref(), table.as_ref()),
                t,
                tbar,
                p.x,
                p.y,
                &zquad,
                c.budget.paths,
                &c.resolution,
                c.seed,
            )?;
            out.push_estimate(
                Record::from_estimate(op, "convolution", digest, c.seed, &chk.left),
                &chk.left,
            );
            out.push_estimate(
                Record::from_estimate(op, "kernel(t+tbar)", digest, c.seed, &chk.right),
                &chk.right,
            );
            out.verdicts
                .push(identity_verdict("semigroup property", &chk, noise.is_some()));
        }
        Operation::Laplace => {
            let (lo, hi) = c.noise_span()?;
            let setup = NoiseSetup {
                n_noise: c.budget.n_noise,
                spacing: c.budget.noise_spacing,
                span: (lo, hi),
                mollifier: c.mollifier,
            };
            let est = laplace_transform_moment(
                &c.domain,
                &c.potential,
                c.covariance.as_ref(),
                &c.times,
                &setup,
                &c.quadrature()?,
                c.budget.paths_per_node,
                &c.resolution,
                c.seed,
            )?;
            let mut r = Record::value(op, "moment", digest, c.seed, est.mean);
            r.stderr = est.stderr;
            r.replicates = est.n_noise as u64;
            out.records.push(r);
            out.detail = serde_json::to_value(&est)?;
        }
        Operation::OracleEquivalence => {
            let eps = c.mollifier.map(|m| m.epsilon);
            let rep = oracle_equivalence(
                &c.domain,
                &c.potential,
                c.covariance.as_ref(),
                eps,
                t0,
                c.budget.n_noise,
                &c.oracle_budget(),
                c.seed,
            )?;
            let mut csv = String::from("seed_index,feynman_kac,stderr,spectral,difference,agree\n");
            for s in &rep.comparisons {
                out.push_estimate(
                    Record::from_estimate(op, &format!("seed {}", s.seed_index), digest, c.seed, &s.feynman_kac),
                    &s.feynman_kac,
                );
                out.records.push(Record::value(
                    op,
                    &format!("spectral seed {}", s.seed_index),
                    digest,
                    c.seed,
                    s.spectral.value,
                ));
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    s.seed_index, s.feynman_kac.mean, s.feynman_kac.stderr, s.spectral.value, s.difference, s.agree
                ));
            }
            tables.push(("equivalence.csv".into(), csv));
            out.verdicts.push(Verdict {
                name: "oracle equivalence".into(),
                pass: rep.pass,
                observed: rep.agreement_fraction,
                expected: rep.required_fraction,
                stderr: 0.0,
                detail: format!(
                    "{} of {} seeds within {} joint standard errors",
                    rep.comparisons.iter().filter(|s| s.agree).count(),
                    rep.comparisons.len(),
                    rep.threshold
                ),
            });
            out.detail = serde_json::to_value(&rep)?;
        }
        Operation::EpsilonConvergence => {
            let cov = c.covariance.as_ref().expect("validated");
            let rep = epsilon_convergence(
                &c.domain,
                &c.potential,
                cov,
                &c.epsilons,
                t0,
                c.budget.n_noise,
                &c.oracle_budget(),
                c.seed,
            )?;
            let mut csv = String::from("seed_index,epsilon,gap,joint_stderr\n");
            for r in &rep.rows {
                out.push_estimate(
                    Record::from_estimate(op, &format!("raw seed {}", r.seed_index), digest, c.seed, &r.raw),
                    &r.raw,
                );
                for ((e, g), s) in rep.epsilons.iter().zip(&r.gaps).zip(&r.joint_stderrs) {
                    csv.push_str(&format!("{},{e},{g},{s}\n", r.seed_index));
                }
            }
            tables.push(("convergence.csv".into(), csv));
            out.verdicts.push(convergence_verdict(&rep));
            out.detail = serde_json::to_value(&rep)?;
        }
    }
    Ok(out)
}

fn noise_term<'a>(noise: Option<&'a GridNoisePath>, table: Option<&'a CenterTable>) -> NoiseTerm<'a> {
    match (noise, table) {
        (_, Some(t)) => NoiseTerm::Mollified(t),
        (Some(p), None) => NoiseTerm::Raw(p),
        (None, None) => NoiseTerm::Off,
    }
}

fn identity_verdict(name: &str, chk: &crate::feynman_kac::IdentityCheck, noisy: bool) -> Verdict {
    let k = if noisy { NOISY_IDENTITY_SIGMAS } else { IDENTITY_SIGMAS };
    Verdict::statistical(name, chk.left.mean, chk.right.mean, chk.joint_stderr, k)
}

pub(crate) fn convergence_verdict(rep: &crate::spectral::ConvergenceReport) -> Verdict {
    let n = rep.rows.len();
    let mono = rep.rows.iter().filter(|r| r.monotone).count();
    let within = rep.rows.iter().filter(|r| r.final_within).count();
    Verdict {
        name: "mollifier convergence".into(),
        pass: rep.pass,
        observed: rep.monotone_fraction.min(rep.final_within_fraction),
        expected: rep.required_fraction,
        stderr: 0.0,
        detail: format!(
            "gaps non-increasing on {mono}/{n} seeds, final gap within 3 joint standard errors on {within}/{n}"
        ),
    }
}

/// Sets the numeric field at the dotted `axis` (for example
/// `mollifier.epsilon`, `resolution.n_steps` or `times.0`).
pub fn with_axis(config: &ExperimentConfig, axis: &str, value: f64) -> Result<ExperimentConfig> {
    let mut v = serde_json::to_value(config)?;
    let mut node = &mut v;
    let parts: Vec<&str> = axis.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let next = match node {
            serde_json::Value::Object(m) => m.get_mut(*part),
            serde_json::Value::Array(a) => part.parse::<usize>().ok().and_then(|k| a.get_mut(k)),
            _ => None,
        };
        let Some(next) = next else {
            return invalid(format!("sweep axis `{axis}` does not name a config field"));
        };
        if i + 1 == parts.len() && !(next.is_number() || next.is_null()) {
            return invalid(format!("sweep axis `{axis}` is not numeric"));
        }
        node = next;
    }
    *node = if value.fract() == 0.0 && value.abs() < 9.0e15 {
        serde_json::Value::from(value as i64)
    } else {
        serde_json::Value::from(value)
    };
    Ok(serde_json::from_value(v)?)
}

/// One report per value of `axis`, each with the root seed replaced by the
/// derived seed `(seed, sweep tag, index)`.
pub fn sweep(config: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<Vec<RunReport>> {
    if values.is_empty() {
        return invalid("a sweep needs at least one value");
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut c = with_axis(config, axis, x)?;
            c.seed = derive_seed(config.seed, &[tags::SWEEP, i as u64]);
            run(&c)
        })
        .collect()
}

/// Combined CSV of a sweep: one row per record.
pub fn sweep_csv(axis: &str, values: &[f64], reports: &[RunReport]) -> String {
    let mut s = format!("{axis},operation,label,mean,stderr,replicates,pass\n");
    for (x, r) in values.iter().zip(reports) {
        let pass = r.passed();
        for rec in &r.payload.records {
            s.push_str(&format!(
                "{x},{},{},{},{},{},{pass}\n",
                rec.operation, rec.label, rec.mean, rec.stderr, rec.replicates
            ));
        }
    }
    s
}
