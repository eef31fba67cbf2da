//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every exported function returns a JSON string. The plain Rust versions
//! (`*_json`) are what the bindings wrap and what the tests call.

use fksim::feynman_kac::{deterministic_kernel, PotentialSpec, Resolution};
use fksim::noise::{mollified_derivative, uniform_grid, CovarianceModel, MollifierSpec, NoiseSampler};
use fksim::paths::{Boundary, DomainSpec};
use fksim::rng::substream;
use fksim::spectral::{discretize_form, eigen_solve, FormNoise};
use fksim::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn boundary(name: &str, alpha: f64) -> Result<Boundary> {
    match name {
        "dirichlet" => Ok(Boundary::Dirichlet),
        "neumann" => Ok(Boundary::Robin(0.0)),
        "robin" => Ok(Boundary::Robin(alpha)),
        other => Err(bad(format!("unknown boundary condition `{other}`"))),
    }
}

fn interpolate(grid: &[f64], f: &[f64], x: f64) -> f64 {
    let i = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1) - 1;
    let s = (x - grid[i]) / (grid[i + 1] - grid[i]);
    f[i] + s * (f[i + 1] - f[i])
}

/// `sum_k exp(-lambda_k t) phi_k(x) phi_k(y)` from the discretized operator.
fn spectral_kernel(d: &DomainSpec, t: f64, x: f64, y: f64) -> Result<f64> {
    let form = discretize_form(d, &PotentialSpec::zero(), FormNoise::None, 1024, None)?;
    let r = eigen_solve(&form, 64)?;
    Ok(r.eigenvalues
        .iter()
        .zip(&r.eigenvectors)
        .map(|(l, phi)| (-l * t).exp() * interpolate(&r.grid, phi, x) * interpolate(&r.grid, phi, y))
        .sum())
}

/// Monte Carlo estimate of the kernel of `-1/2 d^2/dx^2` on `[0, 1]`,
/// next to its eigenfunction expansion.
pub fn box_kernel_json(bc: &str, alpha: f64, t: f64, x: f64, y: f64, paths: u32, seed: u64) -> Result<Value> {
    let b = boundary(bc, alpha)?;
    let d = DomainSpec::Interval { b: 1.0, bc0: b, bcb: b };
    let e = deterministic_kernel(
        &d,
        &PotentialSpec::zero(),
        t,
        x,
        y,
        paths.into(),
        &Resolution::default(),
        seed,
    )?;
    Ok(json!({
        "mean": e.mean,
        "stderr": e.stderr,
        "spectral": spectral_kernel(&d, t, x, y)?,
        "replicates": e.replicates,
        "n_steps": e.n_steps,
    }))
}

/// Lowest `k` eigenvalues of one of the demo operators.
pub fn spectrum_json(case: &str, k: usize, intervals: usize) -> Result<Value> {
    let (d, v, radius) = match case {
        "box" => (DomainSpec::dirichlet_box(1.0), PotentialSpec::zero(), None),
        "oscillator" => (DomainSpec::FullLine, PotentialSpec::harmonic(), Some(10.0)),
        "airy" => (DomainSpec::half_line_dirichlet(), PotentialSpec::linear(), Some(14.0)),
        other => return Err(bad(format!("unknown spectrum case `{other}`"))),
    };
    let form = discretize_form(&d, &v, FormNoise::None, intervals, radius)?;
    let r = eigen_solve(&form, k)?;
    Ok(json!({ "eigenvalues": r.eigenvalues, "residuals": r.residuals }))
}

/// One noise path `Xi` on `[-1, 1]` and its mollified derivative.
pub fn noise_json(hurst: f64, epsilon: f64, seed: u64) -> Result<Value> {
    let cov = if hurst == 0.5 {
        CovarianceModel::white(1.0)
    } else {
        CovarianceModel::fractional(1.0, hurst)
    };
    let grid = uniform_grid(-1.0, 1.0, 1.0 / 256.0)?;
    let path = NoiseSampler::new(&cov, &grid)?.sample(&mut substream(seed, &[]))?;
    let m = MollifierSpec::new(epsilon)?;
    let query: Vec<f64> = grid.iter().copied().filter(|&x| x.abs() <= 1.0 - epsilon).collect();
    let derivative = mollified_derivative(&path, &m, &query)?;
    Ok(json!({
        "grid": path.grid(),
        "values": path.values(),
        "query": query,
        "derivative": derivative,
    }))
}

fn to_js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn box_kernel(
    bc: &str,
    alpha: f64,
    t: f64,
    x: f64,
    y: f64,
    paths: u32,
    seed: u64,
) -> std::result::Result<String, JsError> {
    to_js(box_kernel_json(bc, alpha, t, x, y, paths, seed))
}

#[wasm_bindgen]
pub fn spectrum(case: &str, k: usize, intervals: usize) -> std::result::Result<String, JsError> {
    to_js(spectrum_json(case, k, intervals))
}

#[wasm_bindgen]
pub fn noise(hurst: f64, epsilon: f64, seed: u64) -> std::result::Result<String, JsError> {
    to_js(noise_json(hurst, epsilon, seed))
}
