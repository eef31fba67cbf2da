use serde::{Deserialize, Serialize};

use super::eigen::{eigen_solve, SpectralResult};
use super::form::{discretize_form, form_grid, FormNoise};
use crate::error::{invalid, Result};
use crate::feynman_kac::{
    joint_stderr, trace_many, CenterTable, KernelEstimate, NoiseTerm, PotentialSpec, QuadratureSpec, Resolution,
    Stream, Weighting,
};
use crate::noise::{mollified_derivative, uniform_grid, CovarianceModel, GridNoisePath, MollifierSpec, NoiseSampler};
use crate::paths::DomainSpec;
use crate::rng::{substream, tags};

/// A partial trace is flagged when its tail estimate exceeds this fraction.
pub const TAIL_FLAG: f64 = 1e-4;

/// `sum_{k <= k_used} exp(-t lambda_k)` with a geometric tail estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceValue {
    pub value: f64,
    pub tail: f64,
    pub k_used: usize,
    pub reliable: bool,
}

/// Partial spectral trace. The tail beyond `k_used` is estimated as a
/// geometric series with the last available gap as ratio.
pub fn spectral_trace(result: &SpectralResult, t: f64, k_used: usize) -> Result<TraceValue> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("time must be positive, got {t}"));
    }
    let k = k_used.min(result.len());
    if k == 0 {
        return invalid("no eigenvalues available");
    }
    let l = &result.eigenvalues;
    let value: f64 = l[..k].iter().map(|x| (-t * x).exp()).sum();
    let gap = if k >= 2 { l[k - 1] - l[k - 2] } else { l[0] };
    let tail = if gap > 0.0 {
        let r = (-t * gap).exp();
        (-t * l[k - 1]).exp() * r / (1.0 - r)
    } else {
        f64::INFINITY
    };
    let reliable = tail <= TAIL_FLAG * value && k == k_used;
    if reliable {
        log::debug!("spectral trace at t={t}: {value} (+ tail {tail:e})");
    } else {
        log::warn!("spectral trace at t={t} unreliable: tail {tail:e} against partial sum {value}");
    }
    Ok(TraceValue {
        value,
        tail,
        k_used: k,
        reliable,
    })
}

/// Resolution and budgets shared by the oracle comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBudget {
    /// Grid intervals of the discrete form.
    pub grid_intervals: usize,
    /// Eigenpairs in the spectral trace.
    pub eigenpairs: usize,
    pub quadrature_nodes: usize,
    pub paths_per_node: u64,
    /// Spacing of the sampled `Xi`.
    pub noise_spacing: f64,
    /// Extra noise span on each side of the (truncated) domain.
    pub noise_margin: f64,
    /// Truncation radius on unbounded domains.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub resolution: Resolution,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            grid_intervals: 2000,
            eigenpairs: 40,
            quadrature_nodes: 64,
            paths_per_node: 2000,
            noise_spacing: 1.0 / 512.0,
            noise_margin: 0.5,
            radius: None,
            resolution: Resolution::default(),
        }
    }
}

impl OracleBudget {
    fn bounds(&self, domain: &DomainSpec) -> Result<(f64, f64)> {
        let g = form_grid(domain, self.grid_intervals, self.radius)?;
        Ok((g[0], g[g.len() - 1]))
    }

    fn quadrature(&self, domain: &DomainSpec) -> Result<QuadratureSpec> {
        let (lo, hi) = self.bounds(domain)?;
        QuadratureSpec::gauss_legendre(self.quadrature_nodes, lo, hi)
    }

    fn noise_sampler(&self, domain: &DomainSpec, cov: &CovarianceModel) -> Result<NoiseSampler> {
        let (lo, hi) = self.bounds(domain)?;
        let m = self.noise_margin;
        let grid = uniform_grid(lo.min(0.0) - m, hi + m, self.noise_spacing)?;
        NoiseSampler::new(cov, &grid)
    }
}

/// One noise realization in an oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed_index: usize,
    pub feynman_kac: KernelEstimate,
    pub spectral: TraceValue,
    pub difference: f64,
    pub joint_stderr: f64,
    pub agree: bool,
}

/// Per-seed comparison of Feynman-Kac and spectral traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Mollifier width; `None` for the raw noise.
    pub epsilon: Option<f64>,
    pub t: f64,
    /// Agreement threshold in joint standard errors.
    pub threshold: f64,
    pub comparisons: Vec<SeedComparison>,
    pub agreement_fraction: f64,
    /// Fraction of seeds that must agree.
    pub required_fraction: f64,
    pub pass: bool,
}

/// Agreement threshold, in joint standard errors.
pub const EQUIVALENCE_SIGMAS: f64 = 3.0;
/// Fraction of seeds that must agree.
pub const EQUIVALENCE_FRACTION: f64 = 0.95;

fn sample(sampler: &NoiseSampler, seed: u64, j: usize) -> Result<GridNoisePath> {
    sampler.sample(&mut substream(seed, &[tags::ORACLE, tags::NOISE, j as u64]))
}

/// For each noise seed, the Feynman-Kac trace of the operator with noise
/// `Xi'_eps` (or the raw noise when `epsilon` is `None`) against the
/// spectral trace of the discrete form for the same realization. Without a
/// covariance the deterministic operator is compared once.
pub fn oracle_equivalence(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    cov: Option<&CovarianceModel>,
    epsilon: Option<f64>,
    t: f64,
    n_seeds: usize,
    budget: &OracleBudget,
    seed: u64,
) -> Result<EquivalenceReport> {
    if n_seeds == 0 {
        return invalid("at least one noise seed is required");
    }
    let mollifier = epsilon.map(MollifierSpec::new).transpose()?;
    let quad = budget.quadrature(domain)?;
    let sampler = cov.map(|c| budget.noise_sampler(domain, c)).transpose()?;
    let n_seeds = if cov.is_some() { n_seeds } else { 1 };
    let (_, spec) = budget.resolution.resolve(t)?;
    let mut comparisons = Vec::with_capacity(n_seeds);
    for j in 0..n_seeds {
        let noise = sampler.as_ref().map(|s| sample(s, seed, j)).transpose()?;
        let grid = form_grid(domain, budget.grid_intervals, budget.radius)?;
        let nodal;
        let table;
        let (form_noise, term) = match (&noise, &mollifier) {
            (None, _) => (FormNoise::None, NoiseTerm::Off),
            (Some(p), Some(m)) => {
                nodal = mollified_derivative(p, m, &grid)?;
                table = CenterTable::build(p, m, domain, spec.bin_width)?;
                (FormNoise::Nodes(&nodal), NoiseTerm::Mollified(&table))
            }
            (Some(p), None) => (FormNoise::Raw(p), NoiseTerm::Raw(p)),
        };
        let form = discretize_form(domain, potential, form_noise, budget.grid_intervals, budget.radius)?;
        let spectrum = eigen_solve(&form, budget.eigenpairs)?;
        let spectral = spectral_trace(&spectrum, t, budget.eigenpairs)?;
        let stream = Stream::new(seed, &[tags::ORACLE, j as u64]);
        let fk = trace_many(
            domain,
            &[Weighting::new(potential, term)],
            t,
            &quad,
            budget.paths_per_node,
            &budget.resolution,
            &stream,
        )?
        .estimates
        .remove(0);
        let difference = fk.mean - spectral.value;
        let joint_stderr = fk.stderr;
        log::info!(
            "oracle seed {j}: Feynman-Kac {:.6} +- {:.6}, spectral {:.6}",
            fk.mean,
            fk.stderr,
            spectral.value
        );
        comparisons.push(SeedComparison {
            seed_index: j,
            agree: difference.abs() <= EQUIVALENCE_SIGMAS * joint_stderr,
            feynman_kac: fk,
            spectral,
            difference,
            joint_stderr,
        });
    }
    let agreement_fraction = comparisons.iter().filter(|c| c.agree).count() as f64 / comparisons.len() as f64;
    Ok(EquivalenceReport {
        epsilon,
        t,
        threshold: EQUIVALENCE_SIGMAS,
        comparisons,
        agreement_fraction,
        required_fraction: EQUIVALENCE_FRACTION,
        pass: agreement_fraction >= EQUIVALENCE_FRACTION,
    })
}

/// Gaps between mollified and raw Feynman-Kac traces for one noise seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub seed_index: usize,
    pub raw: KernelEstimate,
    pub mollified: Vec<KernelEstimate>,
    /// `|trace_eps - trace_raw|` per mollifier width, in input order.
    pub gaps: Vec<f64>,
    pub joint_stderrs: Vec<f64>,
    pub monotone: bool,
    pub final_within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub t: f64,
    pub rows: Vec<ConvergenceRow>,
    pub monotone_fraction: f64,
    pub final_within_fraction: f64,
    pub required_fraction: f64,
    pub pass: bool,
}

/// Fraction of seeds on which the convergence shadow must hold.
pub const CONVERGENCE_FRACTION: f64 = 0.8;

/// For each noise seed, the traces for every mollifier width (on one shared
/// set of paths, so the gaps move together) and the raw-noise trace on an
/// independent set of paths. `epsilons` should be decreasing.
pub fn epsilon_convergence(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    cov: &CovarianceModel,
    epsilons: &[f64],
    t: f64,
    n_seeds: usize,
    budget: &OracleBudget,
    seed: u64,
) -> Result<ConvergenceReport> {
    if epsilons.is_empty() || n_seeds == 0 {
        return invalid("need at least one mollifier width and one seed");
    }
    let mollifiers = epsilons
        .iter()
        .map(|&e| MollifierSpec::new(e))
        .collect::<Result<Vec<_>>>()?;
    let quad = budget.quadrature(domain)?;
    let sampler = budget.noise_sampler(domain, cov)?;
    let (_, spec) = budget.resolution.resolve(t)?;
    let mut rows = Vec::with_capacity(n_seeds);
    for j in 0..n_seeds {
        let noise = sample(&sampler, seed, j)?;
        let tables = mollifiers
            .iter()
            .map(|m| CenterTable::build(&noise, m, domain, spec.bin_width))
            .collect::<Result<Vec<_>>>()?;
        let weightings: Vec<Weighting> = tables
            .iter()
            .map(|tab| Weighting::new(potential, NoiseTerm::Mollified(tab)))
            .collect();
        let root = Stream::new(seed, &[tags::ORACLE, tags::SWEEP, j as u64]);
        let per = budget.paths_per_node;
        let mollified = trace_many(domain, &weightings, t, &quad, per, &budget.resolution, &root.child(0))?.estimates;
        let raw = trace_many(
            domain,
            &[Weighting::new(potential, NoiseTerm::Raw(&noise))],
            t,
            &quad,
            per,
            &budget.resolution,
            &root.child(1),
        )?
        .estimates
        .remove(0);
        let gaps: Vec<f64> = mollified.iter().map(|e| (e.mean - raw.mean).abs()).collect();
        let joint_stderrs: Vec<f64> = mollified.iter().map(|e| joint_stderr(e, &raw)).collect();
        let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
        let last = gaps.len() - 1;
        let final_within = gaps[last] < EQUIVALENCE_SIGMAS * joint_stderrs[last];
        log::info!("convergence seed {j}: gaps {gaps:?}, joint stderrs {joint_stderrs:?}");
        rows.push(ConvergenceRow {
            seed_index: j,
            raw,
            mollified,
            gaps,
            joint_stderrs,
            monotone,
            final_within,
        });
    }
    let n = rows.len() as f64;
    let monotone_fraction = rows.iter().filter(|r| r.monotone).count() as f64 / n;
    let final_within_fraction = rows.iter().filter(|r| r.final_within).count() as f64 / n;
    Ok(ConvergenceReport {
        epsilons: epsilons.to_vec(),
        t,
        rows,
        monotone_fraction,
        final_within_fraction,
        required_fraction: CONVERGENCE_FRACTION,
        pass: monotone_fraction >= CONVERGENCE_FRACTION && final_within_fraction >= CONVERGENCE_FRACTION,
    })
}
