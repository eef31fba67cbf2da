use std::io::Write;
use std::sync::Arc;

use super::covariance::CovarianceModel;
use super::mollifier::MollifierSpec;
use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre_unit;

/// A realization of the antiderivative process `Xi` on a grid, with
/// `Xi(0) = 0`. Between abscissae the path is the linear interpolant.
///
/// The stored values are pinned at the origin. An additive `offset` may be
/// attached (see [`GridNoisePath::with_offset`]); every integral in the crate
/// depends on increments only and never reads it.
#[derive(Debug, Clone)]
pub struct GridNoisePath {
    grid: Vec<f64>,
    values: Vec<f64>,
    offset: f64,
    step: Option<f64>,
    covariance: Option<Arc<CovarianceModel>>,
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<usize> {
    if grid.len() < 2 {
        return invalid("noise grid needs at least two abscissae");
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return invalid("noise grid must be finite");
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("noise grid must be strictly increasing");
    }
    grid.iter()
        .position(|&x| x == 0.0)
        .ok_or_else(|| Error::InvalidInput("noise grid must contain the origin".into()))
}

fn detect_step(grid: &[f64]) -> Option<f64> {
    let n = grid.len() - 1;
    let h = (grid[n] - grid[0]) / n as f64;
    let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
    uniform.then_some(h)
}

/// A uniform grid `{k h : lo <= k h <= hi}` containing the origin.
pub fn uniform_grid(lo: f64, hi: f64, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) || !(lo <= 0.0 && hi >= 0.0) || hi - lo < h {
        return invalid("uniform grid needs h > 0 and lo <= 0 <= hi with hi - lo >= h");
    }
    let k0 = (lo / h).floor() as i64;
    let k1 = (hi / h).ceil() as i64;
    Ok((k0..=k1).map(|k| k as f64 * h).collect())
}

impl GridNoisePath {
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let origin = validate_grid(&grid)?;
        if values.len() != grid.len() {
            return invalid("noise values and grid differ in length");
        }
        if values[origin] != 0.0 {
            return invalid("noise path must vanish at the origin");
        }
        let step = detect_step(&grid);
        Ok(GridNoisePath {
            grid,
            values,
            offset: 0.0,
            step,
            covariance: None,
        })
    }

    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&x| if x == 0.0 { 0.0 } else { f(x) }).collect();
        Self::from_values(grid, values)
    }

    pub fn zero(grid: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        Self::from_values(grid, vec![0.0; n])
    }

    pub(crate) fn with_covariance(mut self, cov: Arc<CovarianceModel>) -> Self {
        self.covariance = Some(cov);
        self
    }

    /// The same increments shifted by a constant.
    pub fn with_offset(&self, offset: f64) -> Self {
        let mut p = self.clone();
        p.offset += offset;
        p
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Pinned values (`Xi(0) = 0`), without any offset.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn covariance(&self) -> Option<&CovarianceModel> {
        self.covariance.as_deref()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        let (a, b) = self.span();
        lo >= a && hi <= b
    }

    #[inline]
    fn segment(&self, x: f64) -> usize {
        let last = self.grid.len() - 2;
        match self.step {
            Some(h) => {
                let k = ((x - self.grid[0]) / h).floor();
                let mut i = if k <= 0.0 { 0 } else { (k as usize).min(last) };
                // the uniform guess can be off by one through rounding
                if i > 0 && x < self.grid[i] {
                    i -= 1;
                } else if i < last && x >= self.grid[i + 1] {
                    i += 1;
                }
                i
            }
            None => self.grid.partition_point(|&g| g <= x).saturating_sub(1).min(last),
        }
    }

    /// Linear interpolant of the pinned values; `None` outside the span.
    #[inline]
    pub(crate) fn pinned_at(&self, x: f64) -> Option<f64> {
        let (a, b) = self.span();
        if !(x >= a && x <= b) {
            return None;
        }
        let i = self.segment(x);
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        if x == x0 {
            return Some(v0);
        }
        if x == x1 {
            return Some(v1);
        }
        Some(v0 + (v1 - v0) * (x - x0) / (x1 - x0))
    }

    /// `Xi(x)` including the offset.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.span();
        self.pinned_at(x)
            .map(|v| v + self.offset)
            .ok_or(Error::OutOfSpan { x, lo, hi })
    }

    /// `Xi(b) - Xi(a)`.
    pub fn increment(&self, a: f64, b: f64) -> Result<f64> {
        let (lo, hi) = self.span();
        match (self.pinned_at(a), self.pinned_at(b)) {
            (Some(va), Some(vb)) => Ok(vb - va),
            _ => Err(Error::OutOfSpan {
                x: if self.pinned_at(a).is_none() { a } else { b },
                lo,
                hi,
            }),
        }
    }

    /// Two-column CSV `abscissa,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "abscissa,value")?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{x},{}", v + self.offset)?;
        }
        Ok(())
    }
}

fn check_query(path: &GridNoisePath, m: &MollifierSpec, query: &[f64]) -> Result<()> {
    let (lo, hi) = path.span();
    for &x in query {
        if !(x - m.epsilon >= lo && x + m.epsilon <= hi) {
            return Err(Error::OutOfSpan {
                x,
                lo: lo + m.epsilon,
                hi: hi - m.epsilon,
            });
        }
    }
    Ok(())
}

/// `Xi'_eps(x) = int Xi(x - z) rho_eps'(z) dz` at each query abscissa.
///
/// On each grid segment the interpolant has constant slope, so the integral
/// (after one integration by parts) is `sum_j slope_j * int_seg rho_eps(x - u) du`,
/// evaluated exactly with the bump's polynomial CDF.
pub fn mollified_derivative(path: &GridNoisePath, m: &MollifierSpec, query: &[f64]) -> Result<Vec<f64>> {
    m.validate()?;
    check_query(path, m, query)?;
    let g = &path.grid;
    let v = &path.values;
    Ok(query
        .iter()
        .map(|&x| {
            let lo = x - m.epsilon;
            let hi = x + m.epsilon;
            let mut i = path.segment(lo);
            let mut s = 0.0;
            while i + 1 < g.len() && g[i] < hi {
                let slope = (v[i + 1] - v[i]) / (g[i + 1] - g[i]);
                // int_{g_i}^{g_{i+1}} rho_eps(x - u) du
                let w = m.cdf(x - g[i]) - m.cdf(x - g[i + 1]);
                s += slope * w;
                i += 1;
            }
            s
        })
        .collect())
}

/// `Xi_eps(x) = int Xi(x - z) rho_eps(z) dz` by Gauss-Legendre on each
/// grid segment (exact for the piecewise-linear interpolant).
pub fn mollified_value(path: &GridNoisePath, m: &MollifierSpec, query: &[f64]) -> Result<Vec<f64>> {
    m.validate()?;
    check_query(path, m, query)?;
    let (gx, gw) = gauss_legendre_unit(8);
    let g = &path.grid;
    Ok(query
        .iter()
        .map(|&x| {
            let lo = x - m.epsilon;
            let hi = x + m.epsilon;
            let mut i = path.segment(lo);
            let mut s = 0.0;
            while i + 1 < g.len() && g[i] < hi {
                let a = g[i].max(lo);
                let b = g[i + 1].min(hi);
                if b > a {
                    let half = 0.5 * (b - a);
                    let mid = 0.5 * (a + b);
                    for (t, w) in gx.iter().zip(&gw) {
                        let u = mid + half * t;
                        let xi = path.pinned_at(u).unwrap_or(0.0);
                        s += half * w * xi * m.density(x - u);
                    }
                }
                i += 1;
            }
            s
        })
        .collect())
}
