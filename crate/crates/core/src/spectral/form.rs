use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::feynman_kac::PotentialSpec;
use crate::noise::GridNoisePath;
use crate::paths::{Boundary, DomainSpec};

/// Smallest number of grid intervals accepted by [`discretize_form`].
pub const MIN_INTERVALS: usize = 16;

/// The noise part of the discrete form.
#[derive(Debug, Clone, Copy)]
pub enum FormNoise<'a> {
    None,
    /// A function (typically `Xi'_eps`) sampled at every node of [`form_grid`].
    Nodes(&'a [f64]),
    /// `xi(f^2)` for the raw noise, lumped on the dual cells
    /// `[x_i - h/2, x_i + h/2]` clipped to the domain.
    Raw(&'a GridNoisePath),
}

/// Nodes `x_0 < ... < x_n` of the uniform grid used for `domain`:
/// `[0, b]` on an interval, `[0, R]` on the half line, `[-R, R]` on the line.
pub fn form_grid(domain: &DomainSpec, n: usize, radius: Option<f64>) -> Result<Vec<f64>> {
    domain.validate()?;
    if n < MIN_INTERVALS {
        return invalid(format!("the grid needs at least {MIN_INTERVALS} intervals, got {n}"));
    }
    let (lo, hi) = match (domain, radius) {
        (DomainSpec::Interval { b, .. }, _) => (0.0, *b),
        (_, None) => return invalid("a truncation radius is required on unbounded domains"),
        (_, Some(r)) if !(r > 0.0 && r.is_finite()) => return invalid("truncation radius must be positive"),
        (DomainSpec::HalfLine { .. }, Some(r)) => (0.0, r),
        (DomainSpec::FullLine, Some(r)) => (-r, r),
    };
    let h = (hi - lo) / n as f64;
    Ok((0..=n).map(|i| if i == n { hi } else { lo + i as f64 * h }).collect())
}

/// The lumped (trapezoid) discretization of the quadratic form
/// `1/2 <f', f'> + <f^2, V> + xi(f^2)` plus the Robin boundary terms, on
/// the nodes that are not eliminated by Dirichlet conditions.
///
/// With lumped masses `m_i` the generalized problem `A f = lambda M f` is
/// stored in the symmetric form `M^{-1/2} A M^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteForm {
    pub grid: Vec<f64>,
    pub spacing: f64,
    /// Index of the first and last unknown node.
    pub first: usize,
    pub last: usize,
    /// Lumped masses of the unknown nodes.
    pub mass: Vec<f64>,
    /// Diagonal and off-diagonal of `A` (unsymmetrized).
    pub stiffness_diag: Vec<f64>,
    pub stiffness_off: Vec<f64>,
}

impl DiscreteForm {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Diagonal and off-diagonal of `M^{-1/2} A M^{-1/2}`.
    pub fn symmetric(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.stiffness_diag.iter().zip(&self.mass).map(|(a, m)| a / m).collect();
        let e = self
            .stiffness_off
            .iter()
            .enumerate()
            .map(|(i, a)| a / (self.mass[i] * self.mass[i + 1]).sqrt())
            .collect();
        (d, e)
    }

    /// `f^T A f` for nodal values `f` on the unknown nodes.
    pub fn energy(&self, f: &[f64]) -> f64 {
        let mut s: f64 = f.iter().zip(&self.stiffness_diag).map(|(x, a)| a * x * x).sum();
        for (i, a) in self.stiffness_off.iter().enumerate() {
            s += 2.0 * a * f[i] * f[i + 1];
        }
        s
    }

    /// Adds `m_i * g(x_i)` to the diagonal.
    pub fn add_potential(&mut self, g: impl Fn(f64) -> f64) {
        for (j, a) in self.stiffness_diag.iter_mut().enumerate() {
            *a += self.mass[j] * g(self.grid[self.first + j]);
        }
    }
}

/// Builds the discrete form for `domain`. `n` is the number of grid
/// intervals; `radius` truncates unbounded domains, where an artificial
/// Dirichlet condition is imposed.
pub fn discretize_form(
    domain: &DomainSpec,
    potential: &PotentialSpec,
    noise: FormNoise,
    n: usize,
    radius: Option<f64>,
) -> Result<DiscreteForm> {
    potential.validate(domain)?;
    let grid = form_grid(domain, n, radius)?;
    let h = (grid[n] - grid[0]) / n as f64;
    let (left, right) = match domain {
        DomainSpec::FullLine => (Boundary::Dirichlet, Boundary::Dirichlet),
        DomainSpec::HalfLine { bc0 } => (*bc0, Boundary::Dirichlet),
        DomainSpec::Interval { bc0, bcb, .. } => (*bc0, *bcb),
    };
    let first = usize::from(left.is_dirichlet());
    let last = if right.is_dirichlet() { n - 1 } else { n };
    let len = last - first + 1;
    let node_mass = |i: usize| if i == 0 || i == n { 0.5 * h } else { h };
    let mass: Vec<f64> = (first..=last).map(node_mass).collect();
    let k = 0.5 / h;
    let mut diag = vec![0.0; len];
    for (j, i) in (first..=last).enumerate() {
        let edges = usize::from(i > 0) + usize::from(i < n);
        diag[j] = k * edges as f64 + mass[j] * potential.eval_shifted(grid[i]);
    }
    let off = vec![-k; len - 1];
    match noise {
        FormNoise::None => {}
        FormNoise::Nodes(q) => {
            if q.len() != grid.len() {
                return invalid(format!("noise values: expected {} nodes, got {}", grid.len(), q.len()));
            }
            for (j, i) in (first..=last).enumerate() {
                diag[j] += mass[j] * q[i];
            }
        }
        FormNoise::Raw(path) => {
            for (j, i) in (first..=last).enumerate() {
                let a = if i == 0 { grid[0] } else { grid[i] - 0.5 * h };
                let b = if i == n { grid[n] } else { grid[i] + 0.5 * h };
                diag[j] += path.increment(a, b)?;
            }
        }
    }
    if let Boundary::Robin(alpha) = left {
        diag[0] -= 0.5 * alpha;
    }
    if let Boundary::Robin(beta) = right {
        diag[len - 1] -= 0.5 * beta;
    }
    Ok(DiscreteForm {
        grid,
        spacing: h,
        first,
        last,
        mass,
        stiffness_diag: diag,
        stiffness_off: off,
    })
}
