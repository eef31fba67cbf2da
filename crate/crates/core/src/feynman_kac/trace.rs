use serde::{Deserialize, Serialize};

use super::estimate::{joint_stderr, KernelEstimate, MultiEstimate, QuadratureSpec, Resolution, TruncationCertificate};
use super::kernel::{kernel_many, Stream};
use super::potential::PotentialSpec;
use super::weight::{CenterTable, NoiseTerm, Weighting};
use crate::error::{invalid, Error, Result};
use crate::exec::map_indexed;
use crate::noise::{sample_noise_path, uniform_grid, CovarianceModel, MollifierSpec};
use crate::paths::{transition_kernel, DomainSpec};
use crate::rng::{substream, tags};

/// Required ratio between the truncation tail bound and the trace.
pub const TRUNCATION_RATIO: f64 = 1e-3;

/// Smallest node count accepted by the Hilbert-Schmidt check.
pub const MIN_HS_NODES: usize = 8;

fn certify(
    domain: &DomainSpec,
    potentials: &[&PotentialSpec],
    t: f64,
    quad: &QuadratureSpec,
    estimates: &[f64],
) -> Result<Option<TruncationCertificate>> {
    if domain.is_bounded() {
        return Ok(None);
    }
    let r = quad.radius();
    let pi = transition_kernel(domain, t, r, r)?;
    let mut worst: Option<TruncationCertificate> = None;
    for (p, est) in potentials.iter().zip(estimates) {
        let inf = p
            .inf_beyond(domain, r)
            .ok_or_else(|| Error::Truncation("no lower bound for the potential beyond the truncation radius".into()))?;
        let tail = pi * (-t * (inf + p.offset)).exp();
        let ratio = tail / est.abs();
        if !(ratio < TRUNCATION_RATIO) {
            return Err(Error::Truncation(format!(
                "tail bound {tail:e} at radius {r} is not below {TRUNCATION_RATIO} of the trace {est:e}"
            )));
        }
        if worst.is_none_or(|w| ratio > w.ratio) {
            worst = Some(TruncationCertificate {
                radius: r,
                tail_bound: tail,
                ratio,
            });
        }
    }
    if let Some(c) = worst {
        log::info!(
            "truncation certificate: radius {}, tail {:e}, ratio {:e}",
            c.radius,
            c.tail_bound,
            c.ratio
        );
    }
    Ok(worst)
}

fn check_quadrature(domain: &DomainSpec, quad: &QuadratureSpec) -> Result<()> {
    if quad.is_empty() || quad.nodes.len() != quad.weights.len() {
        return invalid("quadrature needs matching nonempty nodes and weights");
    }
    if quad.nodes.iter().any(|&x| !domain.contains_closed(x)) {
        return invalid("quadrature nodes must lie in the domain");
    }
    Ok(())
}

/// `sum_j w_j K(t; x_j, x_j)` for several weightings sharing paths at each
/// node; node `j` draws from `stream ++ [j]`.
pub fn trace_many(
    domain: &DomainSpec,
    weightings: &[Weighting],
    t: f64,
    quad: &QuadratureSpec,
    paths_per_node: u64,
    resolution: &Resolution,
    stream: &Stream,
) -> Result<MultiEstimate> {
    check_quadrature(domain, quad)?;
    let k = weightings.len();
    let per_node = map_indexed(quad.len(), |j| {
        let x = quad.nodes[j];
        kernel_many(
            domain,
            weightings,
            t,
            x,
            x,
            paths_per_node,
            resolution,
            &stream.child(j as u64),
        )
    });
    let mut estimates: Vec<KernelEstimate> = Vec::with_capacity(k);
    let mut covariance = vec![0.0; k * k];
    let mut first = true;
    for (j, node) in per_node.into_iter().enumerate() {
        let node = node?;
        let w = quad.weights[j];
        for (i, e) in node.estimates.iter().enumerate() {
            if first {
                let mut e0 = e.clone();
                e0.mean = 0.0;
                e0.stderr = 0.0;
                e0.replicates = 0;
                e0.discarded = 0;
                estimates.push(e0);
            }
            let acc = &mut estimates[i];
            acc.mean += w * e.mean;
            acc.replicates += e.replicates;
            acc.discarded += e.discarded;
            for msg in &e.warnings {
                if !acc.warnings.contains(msg) {
                    acc.warnings.push(msg.clone());
                }
            }
        }
        for a in 0..k * k {
            covariance[a] += w * w * node.covariance[a];
        }
        first = false;
    }
    for (i, e) in estimates.iter_mut().enumerate() {
        e.stderr = covariance[i * k + i].max(0.0).sqrt();
    }
    let potentials: Vec<&PotentialSpec> = weightings.iter().map(|w| w.potential).collect();
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    if let Some(c) = certify(domain, &potentials, t, quad, &means)? {
        for e in &mut estimates {
            e.truncation = Some(c);
        }
    }
    Ok(MultiEstimate { estimates, covariance })
}

/// `Tr K(t) = int K(t; x, x) dx` by quadrature over the (truncated) domain.
/// On unbounded domains the truncation radius must satisfy the tail
/// certificate, otherwise [`Error::Truncation`] is returned.
pub fn trace_estimate(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    noise: NoiseTerm,
    t: f64,
    quad: &QuadratureSpec,
    paths_per_node: u64,
    resolution: &Resolution,
    seed: u64,
) -> Result<KernelEstimate> {
    let stream = Stream::new(seed, &[tags::TRACE]);
    let mut m = trace_many(
        domain,
        &[Weighting::new(potential, noise)],
        t,
        quad,
        paths_per_node,
        resolution,
        &stream,
    )?;
    Ok(m.estimates.remove(0))
}

/// Two estimates of the same quantity with their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub left: KernelEstimate,
    pub right: KernelEstimate,
    pub difference: f64,
    pub joint_stderr: f64,
}

impl IdentityCheck {
    fn new(left: KernelEstimate, right: KernelEstimate) -> Self {
        IdentityCheck {
            difference: left.mean - right.mean,
            joint_stderr: joint_stderr(&left, &right),
            left,
            right,
        }
    }

    /// `|difference| <= k * joint_stderr`.
    pub fn within(&self, k: f64) -> bool {
        self.difference.abs() <= k * self.joint_stderr
    }
}

/// Sum of `c_j * A_j * B_j` over independent estimates `A_j`, `B_j`, with
/// the variance of each product from the delta-free formula
/// `m_a^2 s_b^2 + m_b^2 s_a^2 + s_a^2 s_b^2`.
fn product_sum(terms: &[(f64, KernelEstimate, KernelEstimate)], template: &KernelEstimate) -> KernelEstimate {
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut replicates = 0;
    let mut discarded = 0;
    let mut warnings: Vec<String> = Vec::new();
    for (c, a, b) in terms {
        mean += c * a.mean * b.mean;
        let (sa, sb) = (a.stderr * a.stderr, b.stderr * b.stderr);
        var += c * c * (a.mean * a.mean * sb + b.mean * b.mean * sa + sa * sb);
        replicates += a.replicates + b.replicates;
        discarded += a.discarded + b.discarded;
        for m in a.warnings.iter().chain(&b.warnings) {
            if !warnings.contains(m) {
                warnings.push(m.clone());
            }
        }
    }
    KernelEstimate {
        mean,
        stderr: var.sqrt(),
        replicates,
        discarded,
        warnings,
        ..template.clone()
    }
}

/// Budgets for [`hs_norm_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsBudget {
    /// Paths for each of the two independent factors at each node pair.
    pub paths_per_pair: u64,
    pub trace_paths_per_node: u64,
}

/// `||K(t/2)||_2^2` (left) against `Tr K(t)` (right). The squared kernel at
/// each node pair is the product of two independent estimates, and symmetry
/// of the kernel halves the off-diagonal work.
pub fn hs_norm_check(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    noise: NoiseTerm,
    t: f64,
    quad: &QuadratureSpec,
    budget: &HsBudget,
    resolution: &Resolution,
    seed: u64,
) -> Result<IdentityCheck> {
    if quad.len() < MIN_HS_NODES {
        return invalid(format!(
            "the Hilbert-Schmidt check needs at least {MIN_HS_NODES} quadrature nodes"
        ));
    }
    check_quadrature(domain, quad)?;
    let n = quad.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let w = [Weighting::new(potential, noise)];
    let half = 0.5 * t;
    let results = map_indexed(pairs.len(), |p| -> Result<(f64, KernelEstimate, KernelEstimate)> {
        let (i, j) = pairs[p];
        let (x, y) = (quad.nodes[i], quad.nodes[j]);
        let s = Stream::new(seed, &[tags::HS, i as u64, j as u64]);
        let a = kernel_many(domain, &w, half, x, y, budget.paths_per_pair, resolution, &s.child(0))?;
        let b = kernel_many(domain, &w, half, y, x, budget.paths_per_pair, resolution, &s.child(1))?;
        let c = quad.weights[i] * quad.weights[j] * if i == j { 1.0 } else { 2.0 };
        Ok((c, a.estimates[0].clone(), b.estimates[0].clone()))
    });
    let terms = results.into_iter().collect::<Result<Vec<_>>>()?;
    let hs = product_sum(&terms, &terms[0].1);
    let trace = trace_estimate(
        domain,
        potential,
        noise,
        t,
        quad,
        budget.trace_paths_per_node,
        resolution,
        seed,
    )?;
    Ok(IdentityCheck::new(hs, trace))
}

/// `int K(t; x, z) K(tbar; z, y) dz` (left) against `K(t + tbar; x, y)`
/// (right), every factor from its own substream.
pub fn semigroup_check(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    noise: NoiseTerm,
    t: f64,
    tbar: f64,
    x: f64,
    y: f64,
    zquad: &QuadratureSpec,
    paths: u64,
    resolution: &Resolution,
    seed: u64,
) -> Result<IdentityCheck> {
    check_quadrature(domain, zquad)?;
    let w = [Weighting::new(potential, noise)];
    let root = Stream::new(seed, &[tags::SEMIGROUP]);
    let results = map_indexed(zquad.len(), |k| -> Result<(f64, KernelEstimate, KernelEstimate)> {
        let z = zquad.nodes[k];
        let s = root.child(k as u64);
        let a = kernel_many(domain, &w, t, x, z, paths, resolution, &s.child(0))?;
        let b = kernel_many(domain, &w, tbar, z, y, paths, resolution, &s.child(1))?;
        Ok((zquad.weights[k], a.estimates[0].clone(), b.estimates[0].clone()))
    });
    let terms = results.into_iter().collect::<Result<Vec<_>>>()?;
    let left = product_sum(&terms, &terms[0].1);
    let right = kernel_many(domain, &w, t + tbar, x, y, paths, resolution, &root.child(u64::MAX))?
        .estimates
        .remove(0);
    Ok(IdentityCheck::new(left, right))
}

/// How the noise realizations of [`laplace_transform_moment`] are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSetup {
    pub n_noise: usize,
    /// Grid spacing of the sampled `Xi`.
    pub spacing: f64,
    /// Span of the noise grid (must contain 0).
    pub span: (f64, f64),
    /// Use the mollified noise instead of the raw pathwise integral.
    #[serde(default)]
    pub mollifier: Option<MollifierSpec>,
}

/// Outer Monte Carlo over noise of `prod_i Tr exp(-t_i H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_noise: usize,
    /// Sample variance of the per-noise products.
    pub total_variance: f64,
    /// Average inner Monte Carlo variance of the per-noise products.
    pub inner_variance: f64,
    /// `total - inner`: the part due to the noise itself.
    pub noise_variance: f64,
    /// Per noise realization, the trace at each time.
    pub traces: Vec<Vec<f64>>,
}

/// Estimates `E[prod_i Tr exp(-t_i H)]`. With `cov = None` the noise is
/// switched off and a single deterministic realization is used.
pub fn laplace_transform_moment(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    cov: Option<&CovarianceModel>,
    times: &[f64],
    setup: &NoiseSetup,
    quad: &QuadratureSpec,
    paths_per_node: u64,
    resolution: &Resolution,
    seed: u64,
) -> Result<LaplaceEstimate> {
    if times.is_empty() {
        return invalid("at least one time is required");
    }
    let n_noise = if cov.is_some() { setup.n_noise } else { 1 };
    if n_noise == 0 {
        return invalid("at least one noise realization is required");
    }
    let grid = match cov {
        Some(_) => uniform_grid(setup.span.0, setup.span.1, setup.spacing)?,
        None => Vec::new(),
    };
    let mut traces = Vec::with_capacity(n_noise);
    let mut products = Vec::with_capacity(n_noise);
    let mut inner = Vec::with_capacity(n_noise);
    for j in 0..n_noise {
        let noise = match cov {
            Some(c) => Some(sample_noise_path(
                c,
                &grid,
                &mut substream(seed, &[tags::LAPLACE, tags::NOISE, j as u64]),
            )?),
            None => None,
        };
        let mut per_t = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            let (_, spec) = resolution.resolve(t)?;
            let table = match (&noise, &setup.mollifier) {
                (Some(p), Some(m)) => Some(CenterTable::build(p, m, domain, spec.bin_width)?),
                _ => None,
            };
            let term = match (&noise, &table) {
                (_, Some(tab)) => NoiseTerm::Mollified(tab),
                (Some(p), None) => NoiseTerm::Raw(p),
                (None, _) => NoiseTerm::Off,
            };
            let stream = Stream::new(seed, &[tags::LAPLACE, j as u64, i as u64]);
            let m = trace_many(
                domain,
                &[Weighting::new(potential, term)],
                t,
                quad,
                paths_per_node,
                resolution,
                &stream,
            )?;
            per_t.push(m.estimates[0].clone());
        }
        let means: Vec<f64> = per_t.iter().map(|e| e.mean).collect();
        let prod: f64 = means.iter().product();
        // variance of a product of independent estimates
        let second: f64 = per_t.iter().map(|e| e.mean * e.mean + e.stderr * e.stderr).product();
        inner.push(second - prod * prod);
        products.push(prod);
        traces.push(means);
    }
    let n = n_noise as f64;
    let mean = products.iter().sum::<f64>() / n;
    let total_variance = if n_noise > 1 {
        products.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let inner_variance = inner.iter().sum::<f64>() / n;
    let stderr = if n_noise > 1 {
        (total_variance / n).sqrt()
    } else {
        inner_variance.sqrt()
    };
    Ok(LaplaceEstimate {
        mean,
        stderr,
        n_noise,
        total_variance,
        inner_variance,
        noise_variance: (total_variance - inner_variance).max(0.0),
        traces,
    })
}
