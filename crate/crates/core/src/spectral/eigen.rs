use std::io::Write;

use serde::{Deserialize, Serialize};

use super::form::DiscreteForm;
use crate::error::{invalid, Error, Result};

/// Largest accepted residual `||T v - lambda v||_2`.
pub const RESIDUAL_TOL: f64 = 1e-8;

const INVERSE_ITERATIONS: usize = 6;

/// The lowest eigenpairs of a discrete form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// Nodal values on the full grid (zero on eliminated nodes), normalized
    /// to `sum_i m_i f_i^2 = 1`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub grid: Vec<f64>,
    pub spacing: f64,
    /// Lumped masses on the full grid.
    pub mass: Vec<f64>,
}

impl SpectralResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Discrete `L^2` inner product of eigenvectors `i` and `j`.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        self.eigenvectors[i]
            .iter()
            .zip(&self.eigenvectors[j])
            .zip(&self.mass)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    /// CSV `k,lambda` with `k` starting at 1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,lambda")?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{l}", k + 1)?;
        }
        Ok(())
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(d, e)` below `x`.
pub(crate) fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = d[0] - x;
    for i in 0..d.len() {
        if i > 0 {
            q = d[i] - x - e[i - 1] * e[i - 1] / q;
        }
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d.len() {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i < e.len() { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// The `j`-th smallest eigenvalue (from 0) by bisection on the Sturm count.
fn bisect(d: &[f64], e: &[f64], j: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift) x = b` in place by Gaussian elimination with partial
/// pivoting; exact zero pivots are replaced by `pivot_floor`.
fn shifted_solve(d: &[f64], e: &[f64], shift: f64, pivot_floor: f64, b: &mut [f64]) {
    let n = d.len();
    // rows of U: (u0, u1, u2) at columns (i, i+1, i+2)
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut cur = [d[0] - shift, if n > 1 { e[0] } else { 0.0 }, 0.0];
    for i in 0..n {
        if i + 1 < n {
            let below = [e[i], d[i + 1] - shift, if i + 2 < n { e[i + 1] } else { 0.0 }];
            if below[0].abs() > cur[0].abs() {
                // swap rows i and i+1
                let l = cur[0] / below[0];
                u0[i] = below[0];
                u1[i] = below[1];
                u2[i] = below[2];
                b.swap(i, i + 1);
                cur = [cur[1] - l * below[1], cur[2] - l * below[2], 0.0];
                b[i + 1] -= l * b[i];
            } else {
                let p = if cur[0] == 0.0 { pivot_floor } else { cur[0] };
                let l = below[0] / p;
                u0[i] = p;
                u1[i] = cur[1];
                u2[i] = cur[2];
                cur = [below[1] - l * cur[1], below[2] - l * cur[2], 0.0];
                b[i + 1] -= l * b[i];
            }
        } else {
            u0[i] = if cur[0] == 0.0 { pivot_floor } else { cur[0] };
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u1[i] * b[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * b[i + 2];
        }
        b[i] = s / u0[i];
    }
}

fn residual(d: &[f64], e: &[f64], lambda: f64, v: &[f64]) -> f64 {
    let n = d.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut r = (d[i] - lambda) * v[i];
        if i > 0 {
            r += e[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            r += e[i] * v[i + 1];
        }
        s += r * r;
    }
    s.sqrt()
}

fn normalize(v: &mut [f64]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Smallest `k` eigenpairs of the symmetric tridiagonal `(d, e)`, with
/// eigenvectors of unit Euclidean norm. Eigenvalues come from bisection
/// and vectors from inverse iteration, reorthogonalized within clusters.
pub fn tridiagonal_eigen(d: &[f64], e: &[f64], k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let n = d.len();
    if n == 0 || e.len() + 1 != n {
        return invalid("tridiagonal matrix has inconsistent dimensions");
    }
    if k == 0 || k > n {
        return invalid(format!("cannot compute {k} eigenpairs of a {n}x{n} matrix"));
    }
    let (glo, ghi) = gershgorin(d, e);
    let norm = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
    let pad = 1e-12 * norm;
    let mut values = Vec::with_capacity(k);
    let mut lo = glo - pad;
    for j in 0..k {
        let l = bisect(d, e, j, lo, ghi + pad);
        values.push(l);
        lo = l - 4.0 * f64::EPSILON * norm;
    }
    let cluster = 1e-3 * norm;
    let pivot_floor = f64::EPSILON * norm;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (j, &l) in values.iter().enumerate() {
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_749_895 + j as f64 * 0.414_213_562).fract() - 0.5))
            .collect();
        normalize(&mut v);
        let start = (0..j)
            .rev()
            .take_while(|&i| l - values[i] < cluster)
            .last()
            .unwrap_or(j);
        let mut best = f64::INFINITY;
        let mut best_v = v.clone();
        for _ in 0..INVERSE_ITERATIONS {
            shifted_solve(d, e, l, pivot_floor, &mut v);
            for prev in &vectors[start..j] {
                let p: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(a, b)| *a -= p * b);
            }
            normalize(&mut v);
            let r = residual(d, e, l, &v);
            if r < best {
                best = r;
                best_v.copy_from_slice(&v);
            }
            if r <= 0.01 * RESIDUAL_TOL {
                break;
            }
        }
        if !(best <= RESIDUAL_TOL) {
            return Err(Error::Eigensolver {
                index: j,
                residual: best,
            });
        }
        // fix the sign so the largest component is positive
        let imax = (0..n)
            .max_by(|&a, &b| best_v[a].abs().total_cmp(&best_v[b].abs()))
            .unwrap_or(0);
        if best_v[imax] < 0.0 {
            best_v.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.push(best_v);
        residuals.push(best);
    }
    Ok((values, vectors, residuals))
}

/// The `k` lowest eigenpairs of `form`; `k` may not exceed a quarter of the
/// number of grid intervals.
pub fn eigen_solve(form: &DiscreteForm, k: usize) -> Result<SpectralResult> {
    let n = form.grid.len() - 1;
    if k == 0 || k > n / 4 {
        return invalid(format!(
            "k = {k} outside the trusted range 1..={} for {n} intervals",
            n / 4
        ));
    }
    let (d, e) = form.symmetric();
    let (values, vectors, residuals) = tridiagonal_eigen(&d, &e, k)?;
    let mut mass = vec![0.0; form.grid.len()];
    mass[form.first..=form.last].copy_from_slice(&form.mass);
    let eigenvectors = vectors
        .into_iter()
        .map(|v| {
            let mut f = vec![0.0; form.grid.len()];
            for (j, x) in v.iter().enumerate() {
                f[form.first + j] = x / form.mass[j].sqrt();
            }
            f
        })
        .collect();
    Ok(SpectralResult {
        eigenvalues: values,
        eigenvectors,
        residuals,
        grid: form.grid.clone(),
        spacing: form.spacing,
        mass,
    })
}
