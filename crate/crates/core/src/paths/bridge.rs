use std::io::Write;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::domain::DomainSpec;
use super::kernel::{image_terms, Truncation};
use crate::error::{invalid, Result};
use crate::rng::Rng;

/// A time-discretized path on `[0, t]` with `n + 1` equally spaced samples.
///
/// `free` holds the unreflected Brownian path and `positions` its image in
/// the domain closure under [`DomainSpec::fold`]. Local times and boundary
/// crossings are computed from the free path.
#[derive(Debug, Clone)]
pub struct BridgePath {
    domain: DomainSpec,
    t: f64,
    free: Vec<f64>,
    positions: Vec<f64>,
    survival: f64,
}

impl BridgePath {
    /// A path from given free positions (used for deterministic test inputs).
    pub fn from_free(domain: DomainSpec, t: f64, free: Vec<f64>) -> Result<Self> {
        if !(t > 0.0) || free.len() < 2 {
            return invalid("a path needs t > 0 and at least two samples");
        }
        let positions = free.iter().map(|&b| domain.fold(b)).collect();
        let mut p = BridgePath {
            domain,
            t,
            free,
            positions,
            survival: 1.0,
        };
        p.survival = p.survival_probability_all();
        Ok(p)
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.free.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.t / self.steps() as f64
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn free_positions(&self) -> &[f64] {
        &self.free
    }

    pub fn start(&self) -> f64 {
        self.positions[0]
    }

    pub fn end(&self) -> f64 {
        self.positions[self.positions.len() - 1]
    }

    /// Product over Dirichlet boundaries and steps of the per-step bridge
    /// non-crossing probabilities (`0` if the path touches one).
    pub fn survival_probability(&self) -> f64 {
        self.survival
    }

    /// CSV `time,position`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,position")?;
        let dt = self.dt();
        for (i, p) in self.positions.iter().enumerate() {
            writeln!(w, "{},{p}", i as f64 * dt)?;
        }
        Ok(())
    }

    fn survival_probability_all(&self) -> f64 {
        let mut p = 1.0;
        for (_, c, bc) in self.domain.boundaries() {
            if bc.is_dirichlet() {
                p *= self.survival_probability_at(c);
            }
        }
        p
    }

    pub(crate) fn survival_probability_at(&self, c: f64) -> f64 {
        let dt = self.dt();
        let period = self.domain.image_period();
        let mut p = 1.0;
        for w in self.free.windows(2) {
            match step_crossing(w[0], w[1], c, period, dt) {
                Crossing::Touched => return 0.0,
                Crossing::Probability(q) => p *= 1.0 - q,
            }
        }
        p
    }
}

pub(crate) enum Crossing {
    Touched,
    Probability(f64),
}

/// Image points of `c` adjacent to the segment `[p, q]`, or a touch.
#[inline]
pub(crate) fn step_crossing(p: f64, q: f64, c: f64, period: Option<f64>, dt: f64) -> Crossing {
    let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
    let (below, above) = match period {
        None => {
            if c >= lo && c <= hi {
                return Crossing::Touched;
            }
            if c < lo {
                (Some(c), None)
            } else {
                (None, Some(c))
            }
        }
        Some(per) => {
            let first = c + ((lo - c) / per).ceil() * per;
            if first <= hi {
                return Crossing::Touched;
            }
            (Some(first - per), Some(first))
        }
    };
    let mut prob = 0.0;
    if let Some(m) = below {
        prob += (-2.0 * (p - m) * (q - m) / dt).exp();
    }
    if let Some(m) = above {
        prob += (-2.0 * (m - p) * (m - q) / dt).exp();
    }
    Crossing::Probability(prob.min(1.0))
}

/// Fills `out[1..=n]` with a Brownian path from `out[0]` with step variance `dt`.
fn brownian(out: &mut [f64], dt: f64, rng: &mut Rng) {
    let sd = dt.sqrt();
    for i in 1..out.len() {
        let z: f64 = rng.sample(StandardNormal);
        out[i] = out[i - 1] + sd * z;
    }
}

fn check_steps(t: f64, n_steps: usize) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("time must be positive, got {t}"));
    }
    if n_steps < 2 {
        return invalid("a path needs at least two steps");
    }
    Ok(())
}

/// Picks an image endpoint `z` with probability proportional to `G_t(x - z)`.
fn pick_image(domain: &DomainSpec, t: f64, x: f64, y: f64, rng: &mut Rng) -> Result<f64> {
    let terms = image_terms(domain, t, x, y, Truncation::default())?;
    if terms.len() == 1 {
        return Ok(terms[0].0);
    }
    let total: f64 = terms.iter().map(|p| p.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(z, w) in &terms {
        if u < w {
            return Ok(z);
        }
        u -= w;
    }
    Ok(terms[terms.len() - 1].0)
}

/// Samples the path of the (reflected) motion from `x` conditioned to be at
/// `y` at time `t`: a free Brownian bridge to an image endpoint chosen by
/// its share of the transition density, then folded into the domain.
pub fn sample_bridge(domain: &DomainSpec, t: f64, x: f64, y: f64, n_steps: usize, rng: &mut Rng) -> Result<BridgePath> {
    check_steps(t, n_steps)?;
    domain.validate()?;
    domain.check_endpoint("x", x)?;
    domain.check_endpoint("y", y)?;
    let z = pick_image(domain, t, x, y, rng)?;
    let mut free = vec![0.0; n_steps + 1];
    free[0] = x;
    brownian(&mut free, t / n_steps as f64, rng);
    // W_s - (s/t)(W_t - (z - x))
    let shift = free[n_steps] - z;
    for (i, b) in free.iter_mut().enumerate().skip(1) {
        *b -= shift * (i as f64 / n_steps as f64);
    }
    free[n_steps] = z;
    let mut path = BridgePath::from_free(*domain, t, free)?;
    path.positions[0] = x;
    path.positions[n_steps] = y;
    Ok(path)
}

/// Samples the unconditioned (reflected) motion from `x` over `[0, t]`.
pub fn sample_free_path(domain: &DomainSpec, t: f64, x: f64, n_steps: usize, rng: &mut Rng) -> Result<BridgePath> {
    check_steps(t, n_steps)?;
    domain.validate()?;
    domain.check_endpoint("x", x)?;
    let mut free = vec![0.0; n_steps + 1];
    free[0] = x;
    brownian(&mut free, t / n_steps as f64, rng);
    let mut path = BridgePath::from_free(*domain, t, free)?;
    path.positions[0] = x;
    Ok(path)
}

/// Killing indicator for the boundary point (or, on the line, level) `c`:
/// `false` if the free path touches an image of `c`, otherwise each step
/// survives with the bridge non-crossing probability, decided by a uniform
/// draw when the crossing probability is not negligible.
pub fn dirichlet_survival(path: &BridgePath, c: f64, rng: &mut Rng) -> Result<bool> {
    let period = match path.domain {
        DomainSpec::FullLine => None,
        _ if path.domain.side_of(c).is_some() => path.domain.image_period(),
        _ => return invalid(format!("{c} is not a boundary point of the domain")),
    };
    let dt = path.dt();
    for w in path.free.windows(2) {
        match step_crossing(w[0], w[1], c, period, dt) {
            Crossing::Touched => return Ok(false),
            Crossing::Probability(q) => {
                if q > 1e-300 && rng.random::<f64>() < q {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
