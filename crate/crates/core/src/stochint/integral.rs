use std::io::Write;

use super::step::{Differentiable, Integrand, StepFunction};
use crate::error::{Error, Result};
use crate::noise::GridNoisePath;
use crate::quad::gauss_legendre_unit;

fn check_span(path: &GridNoisePath, lo: f64, hi: f64) -> Result<()> {
    let (a, b) = path.span();
    if lo < a {
        return Err(Error::OutOfSpan { x: lo, lo: a, hi: b });
    }
    if hi > b {
        return Err(Error::OutOfSpan { x: hi, lo: a, hi: b });
    }
    Ok(())
}

/// `xi(f) = sum_i c_i (Xi(x_{i+1}) - Xi(x_i))`.
pub fn integrate_step(f: &StepFunction, path: &GridNoisePath) -> Result<f64> {
    let (lo, hi) = f.support();
    check_span(path, lo, hi)?;
    let bp = f.breakpoints();
    let mut prev = path.pinned_at(bp[0]).expect("checked span");
    let mut s = 0.0;
    for (i, c) in f.levels().iter().enumerate() {
        let next = path.pinned_at(bp[i + 1]).expect("checked span");
        s += c * (next - prev);
        prev = next;
    }
    Ok(s)
}

/// Integral of a density that is constant on the uniform bins
/// `[first_edge + j w, first_edge + (j + 1) w)`; `None` if the bins leave
/// the path's span.
pub(crate) fn integrate_uniform_bins(
    first_edge: f64,
    width: f64,
    densities: &[f64],
    path: &GridNoisePath,
) -> Option<f64> {
    let mut prev = path.pinned_at(first_edge)?;
    let mut s = 0.0;
    for (j, d) in densities.iter().enumerate() {
        let next = path.pinned_at(first_edge + (j + 1) as f64 * width)?;
        if *d != 0.0 {
            s += d * (next - prev);
        }
        prev = next;
    }
    Some(s)
}

/// `-int f'(x) Xi(x) dx`, by Gauss-Legendre on every piece of the union of
/// the integrand's breakpoints and the noise grid.
pub fn riemann_stieltjes<F: Differentiable + ?Sized>(f: &F, path: &GridNoisePath) -> Result<f64> {
    let (lo, hi) = f.support();
    check_span(path, lo, hi)?;
    let mut pts: Vec<f64> = path
        .grid()
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .chain(f.breakpoints().into_iter().filter(|&x| x > lo && x < hi))
        .chain([lo, hi])
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let (gx, gw) = gauss_legendre_unit(5);
    let mut s = 0.0;
    for w in pts.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        for (t, q) in gx.iter().zip(&gw) {
            let x = mid + half * t;
            s += half * q * f.derivative(x) * path.pinned_at(x).expect("checked span");
        }
    }
    Ok(-s)
}

/// One level of the adaptive step approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct KarandikarLevel {
    pub level: u32,
    /// Stopping abscissae `tau_1 < ... < tau_{k+1}`.
    pub stops: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KarandikarTrace {
    pub levels: Vec<KarandikarLevel>,
    pub converged: bool,
}

impl KarandikarTrace {
    /// The step function `f^(n)` at a recorded level.
    pub fn step_function<F: Integrand + ?Sized>(&self, f: &F, level: u32) -> Option<StepFunction> {
        let l = self.levels.iter().find(|l| l.level == level)?;
        let levels = l.stops[..l.stops.len() - 1].iter().map(|&x| f.eval(x)).collect();
        StepFunction::new(l.stops.clone(), levels).ok()
    }

    /// CSV `level,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "level,value")?;
        for l in &self.levels {
            writeln!(w, "{},{}", l.level, l.value)?;
        }
        Ok(())
    }
}

pub const DEFAULT_MAX_LEVEL: u32 = 16;
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-6;

/// Stopping abscissae of `f^(n)`: `tau_1` and `tau_{k+1}` are the support
/// ends, and each interior stop is the first abscissa where `f` moves by at
/// least `2^-n` from its value at the previous stop. The search scans at
/// resolution `|supp| 2^-(n+4)` and then bisects; a known breakpoint inside
/// the final bracket is taken exactly.
pub fn karandikar_stops<F: Integrand + ?Sized>(f: &F, level: u32) -> Vec<f64> {
    let (lo, hi) = f.support();
    let thr = 0.5f64.powi(level as i32);
    let scan = (hi - lo) * 0.5f64.powi(level as i32 + 4);
    let mut bps = f.breakpoints();
    bps.sort_by(f64::total_cmp);
    let mut stops = vec![lo];
    let mut prev = lo;
    let mut fprev = f.eval(lo);
    let moved = |x: f64, fp: f64| (f.eval(x) - fp).abs() >= thr;
    loop {
        // next scan abscissa, never stepping over a breakpoint
        let mut a = prev;
        let found = loop {
            let mut b = (a + scan).min(hi);
            if let Some(&bp) = bps.iter().find(|&&p| p > a && p < b) {
                b = bp;
            }
            if b >= hi {
                break None;
            }
            if moved(b, fprev) {
                break Some((a, b));
            }
            a = b;
        };
        let Some((mut a, mut b)) = found else { break };
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if moved(m, fprev) {
                b = m;
            } else {
                a = m;
            }
        }
        let tau = match bps.iter().find(|&&p| p >= a && p <= b) {
            Some(&p) if p > prev && moved(p, fprev) => p,
            _ => b,
        };
        stops.push(tau);
        prev = tau;
        fprev = f.eval(tau);
    }
    stops.push(hi);
    stops
}

/// `xi(f) = lim_n xi(f^(n))`, computed for `n = 1..=max_level`. The value at
/// `max_level` is returned with the full trace; `converged` is set when the
/// last two successive differences are below `tol`.
pub fn karandikar_integrate<F: Integrand + ?Sized>(
    f: &F,
    path: &GridNoisePath,
    max_level: u32,
    tol: f64,
) -> Result<(f64, KarandikarTrace)> {
    let (lo, hi) = f.support();
    check_span(path, lo, hi)?;
    let mut levels = Vec::with_capacity(max_level as usize);
    for n in 1..=max_level {
        let stops = karandikar_stops(f, n);
        let mut value = 0.0;
        for w in stops.windows(2) {
            let c = f.eval(w[0]);
            if c != 0.0 {
                value += c * (path.pinned_at(w[1]).expect("span") - path.pinned_at(w[0]).expect("span"));
            }
        }
        levels.push(KarandikarLevel { level: n, stops, value });
    }
    let k = levels.len();
    let converged = k >= 3
        && (levels[k - 1].value - levels[k - 2].value).abs() < tol
        && (levels[k - 2].value - levels[k - 3].value).abs() < tol;
    let value = levels.last().map_or(0.0, |l| l.value);
    Ok((value, KarandikarTrace { levels, converged }))
}
