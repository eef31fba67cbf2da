//! Quadrature rules: Gauss-Legendre node sets and adaptive Gauss-Kronrod.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[lo, hi]`.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre_unit(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| half * w).collect(),
    )
}

/// Nodes and weights on `[-1, 1]`, by Newton iteration on the Legendre
/// recurrence.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-13,
            rel: 1e-11,
            max_intervals: 4000,
        }
    }
}

/// Adaptive Gauss-Kronrod (7/15) over `[a, b]`, bisecting the interval
/// with the largest error estimate until the total estimate meets `tol`.
/// Endpoints are never evaluated, so integrable endpoint singularities are
/// allowed. Returns the value and the final error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let mut pieces = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature {
                residual: f64::INFINITY,
            });
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok((total, err));
        }
        if pieces.len() >= tol.max_intervals {
            return Err(Error::Quadrature { residual: err });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature { residual: err });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// [`integrate`] over consecutive pieces split at `breaks` (which must lie
/// inside `[a, b]`); useful when the integrand has kinks or singularities at
/// known abscissae.
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Result<(f64, f64)> {
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in pts.windows(2) {
        let (v, e) = integrate(&f, w[0], w[1], tol)?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5, 0.0, 2.0);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(9)).sum();
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let (x, w) = gauss_legendre(64, -1.0, 1.0);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let (v, _) = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn non_convergence_reports_residual() {
        let tol = Tolerance {
            abs: 1e-30,
            rel: 1e-30,
            max_intervals: 4,
        };
        match integrate(|x: f64| x.powf(-0.9), 0.0, 1.0, tol) {
            Err(Error::Quadrature { residual }) => assert!(residual > 0.0),
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }
}
