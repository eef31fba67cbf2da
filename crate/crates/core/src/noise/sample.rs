//! Exact Gaussian sampling of `Xi` on a grid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::covariance::{xi_covariance, CovarianceModel};
use super::path::{validate_grid, GridNoisePath};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Grids at or above this size use circulant embedding for fractional noise
/// (when the grid is uniform).
pub const CIRCULANT_THRESHOLD: usize = 4096;

/// Relative diagonal jitter added before factorizing a covariance matrix.
pub const PSD_JITTER: f64 = 1e-10;

/// Draws `Xi` on `grid` (which must contain 0) from the law `cov`.
pub fn sample_noise_path(cov: &CovarianceModel, grid: &[f64], rng: &mut Rng) -> Result<GridNoisePath> {
    NoiseSampler::new(cov, grid)?.sample(rng)
}

enum Plan {
    White(Vec<f64>),
    Increments(DMatrix<f64>),
    Values(DMatrix<f64>),
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
}

/// A covariance factorization for one grid, reusable across draws.
pub struct NoiseSampler {
    grid: Vec<f64>,
    origin: usize,
    cov: Arc<CovarianceModel>,
    plan: Plan,
}

impl NoiseSampler {
    pub fn new(cov: &CovarianceModel, grid: &[f64]) -> Result<Self> {
        cov.validate()?;
        let origin = validate_grid(grid)?;
        let plan = match cov {
            CovarianceModel::White { variance } => {
                Plan::White(grid.windows(2).map(|w| (variance * (w[1] - w[0])).sqrt()).collect())
            }
            CovarianceModel::Fractional { variance, hurst } => fractional_plan(grid, *variance, *hurst)?,
            _ => Plan::Values(correlated_factor(cov, grid, origin)?),
        };
        Ok(NoiseSampler {
            grid: grid.to_vec(),
            origin,
            cov: Arc::new(cov.clone()),
            plan,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<GridNoisePath> {
        let values = match &self.plan {
            Plan::White(sd) => {
                let inc: Vec<f64> = sd.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)).collect();
                accumulate(&inc, self.origin)
            }
            Plan::Increments(l) => {
                let inc: Vec<f64> = (l * standard_normals(l.nrows(), rng)).iter().copied().collect();
                accumulate(&inc, self.origin)
            }
            Plan::Circulant { sqrt_eig, fft } => {
                let n = self.grid.len() - 1;
                let mut w: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        Complex::new(s * a, s * b)
                    })
                    .collect();
                fft.process(&mut w);
                let inc: Vec<f64> = w.iter().take(n).map(|z| z.re).collect();
                accumulate(&inc, self.origin)
            }
            Plan::Values(l) => {
                let x = l * standard_normals(l.nrows(), rng);
                let mut values = Vec::with_capacity(self.grid.len());
                let mut k = 0;
                for i in 0..self.grid.len() {
                    if i == self.origin {
                        values.push(0.0);
                    } else {
                        values.push(x[k]);
                        k += 1;
                    }
                }
                values
            }
        };
        Ok(GridNoisePath::from_values(self.grid.clone(), values)?.with_covariance(self.cov.clone()))
    }
}

/// Cumulative sums outward from the origin, so that the origin value is exactly 0.
fn accumulate(inc: &[f64], origin: usize) -> Vec<f64> {
    let n = inc.len() + 1;
    let mut v = vec![0.0; n];
    for i in origin + 1..n {
        v[i] = v[i - 1] + inc[i - 1];
    }
    for i in (0..origin).rev() {
        v[i] = v[i + 1] - inc[i];
    }
    v
}

fn standard_normals(n: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Lower factor `L` with `L L^T = A` (up to jitter); falls back to a clipped
/// eigen-decomposition when Cholesky breaks down within the jitter band, and
/// rejects matrices whose smallest eigenvalue is below `-jitter`.
fn psd_factor(mut a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let scale = (0..n)
        .map(|i| a[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let jitter = PSD_JITTER * scale;
    for i in 0..n {
        a[(i, i)] += jitter;
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = a.symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -jitter {
        return Err(Error::Indefinite {
            eigenvalue: min - jitter,
        });
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

fn correlated_factor(cov: &CovarianceModel, grid: &[f64], origin: usize) -> Result<DMatrix<f64>> {
    let pts: Vec<f64> = grid
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != origin)
        .map(|(_, &x)| x)
        .collect();
    let m = pts.len();
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let c = xi_covariance(pts[i], pts[j], cov)?;
            a[(i, j)] = c;
            a[(j, i)] = c;
        }
    }
    psd_factor(a)
}

fn fractional_plan(grid: &[f64], variance: f64, hurst: f64) -> Result<Plan> {
    let n = grid.len() - 1;
    let h0 = (grid[n] - grid[0]) / n as f64;
    let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-9 * h0);
    if grid.len() >= CIRCULANT_THRESHOLD && uniform {
        return circulant_plan(n, h0, variance, hurst);
    }
    let half = |u: f64| 0.5 * variance * u.abs().powf(2.0 * hurst);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (p, q) = (grid[i], grid[i + 1]);
            let (r, s) = (grid[j], grid[j + 1]);
            let c = half(q - r) - half(q - s) - half(p - r) + half(p - s);
            a[(i, j)] = c;
            a[(j, i)] = c;
        }
    }
    Ok(Plan::Increments(psd_factor(a)?))
}

/// Autocovariance of fractional Gaussian noise with lag `k` and step `h`.
fn fgn_autocov(k: usize, h: f64, variance: f64, hurst: f64) -> f64 {
    let k = k as f64;
    let e = 2.0 * hurst;
    0.5 * variance * h.powf(e) * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Davies-Harte circulant embedding of `n` fractional Gaussian noise increments.
fn circulant_plan(n: usize, h: f64, variance: f64, hurst: f64) -> Result<Plan> {
    let m = 2 * n;
    let mut c: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(fgn_autocov(lag, h, variance, hurst), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut c);
    let scale = c.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let mut sqrt_eig = Vec::with_capacity(m);
    for z in &c {
        if z.re < -PSD_JITTER * scale {
            return Err(Error::Indefinite { eigenvalue: z.re });
        }
        sqrt_eig.push((z.re.max(0.0) / m as f64).sqrt());
    }
    Ok(Plan::Circulant { sqrt_eig, fft })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{uniform_grid, Profile};
    use crate::rng::substream;

    #[test]
    fn origin_is_pinned_for_every_model() {
        let grid = vec![-1.0, -0.4, 0.0, 0.3, 1.2];
        let models = [
            CovarianceModel::white(2.0),
            CovarianceModel::fractional(1.0, 0.7),
            CovarianceModel::Bounded {
                level: 1.0,
                profile: Profile::Gaussian {
                    amplitude: 1.0,
                    width: 0.5,
                },
            },
        ];
        for (k, m) in models.iter().enumerate() {
            let p = sample_noise_path(m, &grid, &mut substream(3, &[k as u64])).unwrap();
            assert_eq!(p.values()[2], 0.0);
            assert_eq!(p.value_at(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn grid_without_origin_is_rejected() {
        let r = sample_noise_path(&CovarianceModel::white(1.0), &[0.1, 0.2], &mut substream(0, &[]));
        assert!(r.is_err());
    }

    #[test]
    fn circulant_variance_matches_fbm() {
        // one long uniform path: sample variance of increments ~ h^{2H}
        let n = 8192;
        let h = 1.0 / 1024.0;
        let hurst = 0.75;
        let mut rng = substream(11, &[]);
        let mut acc = 0.0;
        let reps = 20;
        let grid = uniform_grid(0.0, n as f64 * h, h).unwrap();
        let sampler = NoiseSampler::new(&CovarianceModel::fractional(1.0, hurst), &grid).unwrap();
        assert!(matches!(sampler.plan, Plan::Circulant { .. }));
        for _ in 0..reps {
            let p = sampler.sample(&mut rng).unwrap();
            let v = p.values();
            acc += v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / n as f64;
        }
        let var = acc / reps as f64;
        let want = h.powf(2.0 * hurst);
        assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
    }
}
