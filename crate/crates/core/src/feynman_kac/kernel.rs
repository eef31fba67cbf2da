use super::estimate::{KernelEstimate, Moments, MultiEstimate, Resolution};
use super::potential::PotentialSpec;
use super::weight::{CenterTable, NoiseTerm, Weighting};
use crate::error::{invalid, Result};
use crate::exec::map_indexed;
use crate::noise::{GridNoisePath, MollifierSpec};
use crate::paths::{
    dirichlet_survival, local_time_for_weights, sample_bridge, transition_kernel, DomainSpec, LocalTimeSpec,
};
use crate::rng::{substream, tags};

/// Paths per independent substream block.
pub const BLOCK: u64 = 256;

/// Warn when more than this fraction of replicates is discarded.
pub const DISCARD_WARNING: f64 = 0.01;

/// The random inputs of a kernel estimate: a root seed and the substream
/// tags identifying this estimate. Block `i` of paths draws from
/// `substream(seed, tags ++ [i])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub seed: u64,
    pub tags: Vec<u64>,
}

impl Stream {
    pub fn new(seed: u64, tags: &[u64]) -> Self {
        Stream {
            seed,
            tags: tags.to_vec(),
        }
    }

    pub fn child(&self, tag: u64) -> Self {
        let mut tags = self.tags.clone();
        tags.push(tag);
        Stream { seed: self.seed, tags }
    }
}

struct Simulation {
    moments: Moments,
    discarded: u64,
}

fn check_inputs(domain: &DomainSpec, weightings: &[Weighting], t: f64, n_paths: u64) -> Result<()> {
    domain.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("time must be positive, got {t}"));
    }
    if n_paths == 0 {
        return invalid("at least one path is required");
    }
    if weightings.is_empty() {
        return invalid("at least one weighting is required");
    }
    for w in weightings {
        w.potential.validate(domain)?;
    }
    Ok(())
}

fn on_dirichlet_boundary(domain: &DomainSpec, x: f64) -> bool {
    domain
        .side_of(x)
        .and_then(|s| domain.boundary(s))
        .is_some_and(|b| b.is_dirichlet())
}

fn simulate(
    domain: &DomainSpec,
    weightings: &[Weighting],
    t: f64,
    x: f64,
    y: f64,
    n_paths: u64,
    n_steps: usize,
    spec: &LocalTimeSpec,
    stream: &Stream,
) -> Result<Simulation> {
    let k = weightings.len();
    let trivial = weightings.iter().all(|w| w.is_trivial(domain));
    let dirichlet: Vec<f64> = domain
        .boundaries()
        .into_iter()
        .filter(|(_, _, bc)| bc.is_dirichlet())
        .map(|(_, c, _)| c)
        .collect();
    let n_blocks = n_paths.div_ceil(BLOCK);
    let blocks = map_indexed(n_blocks as usize, |b| -> Result<Simulation> {
        let mut tags = stream.tags.clone();
        tags.push(b as u64);
        let mut rng = substream(stream.seed, &tags);
        let count = BLOCK.min(n_paths - b as u64 * BLOCK);
        let mut moments = Moments::new(k);
        let mut discarded = 0;
        let mut w = vec![0.0; k];
        for _ in 0..count {
            let path = sample_bridge(domain, t, x, y, n_steps, &mut rng)?;
            let mut alive = true;
            for &c in &dirichlet {
                if !dirichlet_survival(&path, c, &mut rng)? {
                    alive = false;
                    break;
                }
            }
            if !alive {
                w.iter_mut().for_each(|v| *v = 0.0);
            } else if trivial {
                w.iter_mut().for_each(|v| *v = 1.0);
            } else {
                let profile = local_time_for_weights(&path, spec)?;
                let mut ok = true;
                for (wi, weighting) in w.iter_mut().zip(weightings) {
                    match weighting.exponent(&profile, domain) {
                        Some(e) => *wi = e.exp(),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    discarded += 1;
                    continue;
                }
            }
            moments.push(&w);
        }
        Ok(Simulation { moments, discarded })
    });
    let mut total = Simulation {
        moments: Moments::new(k),
        discarded: 0,
    };
    for b in blocks {
        let b = b?;
        total.moments.merge(&b.moments);
        total.discarded += b.discarded;
    }
    Ok(total)
}

/// Estimates `K(t; x, y)` for several weightings on one set of sampled
/// paths. Offsets of the potentials are applied as exact factors.
pub fn kernel_many(
    domain: &DomainSpec,
    weightings: &[Weighting],
    t: f64,
    x: f64,
    y: f64,
    n_paths: u64,
    resolution: &Resolution,
    stream: &Stream,
) -> Result<MultiEstimate> {
    check_inputs(domain, weightings, t, n_paths)?;
    let (n_steps, spec) = resolution.resolve(t)?;
    let k = weightings.len();
    if on_dirichlet_boundary(domain, x) || on_dirichlet_boundary(domain, y) {
        if !domain.contains_closed(x) || !domain.contains_closed(y) {
            return invalid("kernel endpoints must lie in the domain");
        }
        return Ok(MultiEstimate {
            estimates: vec![KernelEstimate::exact(0.0, n_steps, &spec); k],
            covariance: vec![0.0; k * k],
        });
    }
    let pi = transition_kernel(domain, t, x, y)?;
    let sim = simulate(domain, weightings, t, x, y, n_paths, n_steps, &spec, stream)?;
    let m = &sim.moments;
    let factors: Vec<f64> = weightings.iter().map(|w| (-w.potential.offset * t).exp()).collect();
    let mut warnings = Vec::new();
    let attempted = m.n + sim.discarded;
    if sim.discarded as f64 > DISCARD_WARNING * attempted as f64 {
        let msg = format!(
            "{} of {} replicates discarded: paths left the noise span",
            sim.discarded, attempted
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if m.n == 0 {
        return invalid("every replicate was discarded");
    }
    let estimates = (0..k)
        .map(|i| KernelEstimate {
            mean: (pi * m.mean[i]) * factors[i],
            stderr: (pi * m.mean_covariance(i, i).sqrt()) * factors[i],
            replicates: m.n,
            discarded: sim.discarded,
            n_steps,
            bin_width: spec.bin_width,
            boundary_window: spec.window(),
            truncation: None,
            warnings: warnings.clone(),
        })
        .collect();
    let mut covariance = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            covariance[i * k + j] = pi * pi * m.mean_covariance(i, j) * factors[i] * factors[j];
        }
    }
    Ok(MultiEstimate { estimates, covariance })
}

fn single(
    domain: &DomainSpec,
    weighting: Weighting,
    t: f64,
    x: f64,
    y: f64,
    n_paths: u64,
    resolution: &Resolution,
    seed: u64,
) -> Result<KernelEstimate> {
    let stream = Stream::new(seed, &[tags::KERNEL]);
    let mut m = kernel_many(domain, &[weighting], t, x, y, n_paths, resolution, &stream)?;
    Ok(m.estimates.remove(0))
}

/// `K(t; x, y) = Pi(t; x, y) E[exp(-<L_t, V> + alpha_bar L^0 + beta_bar L^b)]`
/// over bridges from `x` to `y`, with Dirichlet boundaries acting through
/// the survival indicator.
pub fn deterministic_kernel(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    t: f64,
    x: f64,
    y: f64,
    n_paths: u64,
    resolution: &Resolution,
    seed: u64,
) -> Result<KernelEstimate> {
    single(
        domain,
        Weighting::new(potential, NoiseTerm::Off),
        t,
        x,
        y,
        n_paths,
        resolution,
        seed,
    )
}

/// The random kernel conditional on the noise path: the deterministic
/// weight times `exp(-xi(L_t))`. Replicates whose local time leaves the
/// noise span are discarded and counted.
pub fn random_kernel(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    noise: &GridNoisePath,
    t: f64,
    x: f64,
    y: f64,
    n_paths: u64,
    resolution: &Resolution,
    seed: u64,
) -> Result<KernelEstimate> {
    single(
        domain,
        Weighting::new(potential, NoiseTerm::Raw(noise)),
        t,
        x,
        y,
        n_paths,
        resolution,
        seed,
    )
}

/// The mollified kernel, with `<L_t, V + Xi'_eps>` in the exponent.
pub fn mollified_kernel(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    noise: &GridNoisePath,
    mollifier: &MollifierSpec,
    t: f64,
    x: f64,
    y: f64,
    n_paths: u64,
    resolution: &Resolution,
    seed: u64,
) -> Result<KernelEstimate> {
    let (_, spec) = resolution.resolve(t)?;
    let table = CenterTable::build(noise, mollifier, domain, spec.bin_width)?;
    single(
        domain,
        Weighting::new(potential, NoiseTerm::Mollified(&table)),
        t,
        x,
        y,
        n_paths,
        resolution,
        seed,
    )
}
