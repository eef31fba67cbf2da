use std::f64::consts::PI;

use super::bridge::BridgePath;
use super::domain::{DomainSpec, Side};
use crate::error::{invalid, Result};
use crate::noise::GridNoisePath;
use crate::quad::gauss_legendre_unit;
use crate::special::erfcx;
use crate::stochint::integrate_uniform_bins;

/// How the boundary local time is estimated from a discretized path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// Expected window occupation of the Brownian bridge between each pair
    /// of samples, given the samples.
    #[default]
    BridgeExpectation,
    /// Window occupation of the piecewise-linear interpolant.
    LinearInterpolant,
}

/// Resolution of [`local_time_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTimeSpec {
    pub bin_width: f64,
    /// Half-width `eps_b` of the boundary window; defaults to the bin width.
    pub boundary_window: Option<f64>,
    pub boundary_rule: BoundaryRule,
}

impl LocalTimeSpec {
    pub fn new(bin_width: f64) -> Self {
        LocalTimeSpec {
            bin_width,
            boundary_window: None,
            boundary_rule: BoundaryRule::default(),
        }
    }

    pub fn window(&self) -> f64 {
        self.boundary_window.unwrap_or(self.bin_width)
    }
}

/// Default bin width for a path of `n_steps` over `[0, t]`: `10 dt / sqrt(t)`.
pub fn default_bin_width(t: f64, n_steps: usize) -> f64 {
    10.0 * (t / n_steps as f64) / t.sqrt()
}

/// Default number of time steps: `2048` per unit time.
pub fn default_steps(t: f64) -> usize {
    ((2048.0 * t).ceil() as usize).max(2)
}

/// Binned interior occupation plus boundary local times.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeProfile {
    first_edge: f64,
    width: f64,
    masses: Vec<f64>,
    horizon: f64,
    boundary: [f64; 2],
    hit: [bool; 2],
}

impl LocalTimeProfile {
    pub fn first_edge(&self) -> f64 {
        self.first_edge
    }

    pub fn bin_width(&self) -> f64 {
        self.width
    }

    /// Lattice index `k` of the first bin, whose left edge is `k * width`.
    pub fn first_index(&self) -> i64 {
        (self.first_edge / self.width).round() as i64
    }

    /// Occupation time of each bin.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.masses.len())
            .map(|j| self.first_edge + j as f64 * self.width)
            .collect()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.masses.len()).map(move |j| self.first_edge + (j as f64 + 0.5) * self.width)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.first_edge, self.first_edge + self.masses.len() as f64 * self.width)
    }

    /// Local time at each bin (mass over width).
    pub fn densities(&self) -> Vec<f64> {
        self.masses.iter().map(|m| m / self.width).collect()
    }

    /// `<L, f> = sum_j mass_j f(center_j)`.
    pub fn pair_midpoint(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.masses
            .iter()
            .zip(self.centers())
            .filter(|(m, _)| **m != 0.0)
            .map(|(m, a)| m * f(a))
            .sum()
    }

    /// `xi(L) = int L^a dXi(a)`; `None` if the profile leaves the noise span.
    pub fn noise_integral(&self, noise: &GridNoisePath) -> Option<f64> {
        let (lo, hi) = self.trimmed();
        if lo == hi {
            return Some(0.0);
        }
        let d: Vec<f64> = self.masses[lo..hi].iter().map(|m| m / self.width).collect();
        integrate_uniform_bins(self.first_edge + lo as f64 * self.width, self.width, &d, noise)
    }

    /// Index range of the nonzero bins.
    fn trimmed(&self) -> (usize, usize) {
        let lo = self.masses.iter().position(|&m| m != 0.0).unwrap_or(0);
        let hi = self.masses.iter().rposition(|&m| m != 0.0).map_or(lo, |i| i + 1);
        (lo, hi)
    }

    /// Boundary local time at a side (`0` where the domain has no boundary).
    pub fn boundary(&self, side: Side) -> f64 {
        self.boundary[side as usize]
    }

    /// Whether the path reached the boundary on `side` before the horizon.
    pub fn hit(&self, side: Side) -> bool {
        self.hit[side as usize]
    }
}

struct Bins {
    first_edge: f64,
    width: f64,
    masses: Vec<f64>,
}

impl Bins {
    #[inline]
    fn index(&self, x: f64) -> usize {
        let k = ((x - self.first_edge) / self.width).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.masses.len() - 1)
        }
    }

    /// Spreads `tau` uniformly over the segment from `u` to `v`.
    #[inline]
    fn deposit(&mut self, u: f64, v: f64, tau: f64) {
        if tau == 0.0 {
            return;
        }
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let i0 = self.index(lo);
        let i1 = self.index(hi);
        if i0 == i1 {
            self.masses[i0] += tau;
            return;
        }
        let rate = tau / (hi - lo);
        let mut left = lo;
        let mut spent = 0.0;
        for i in i0..i1 {
            let edge = self.first_edge + (i + 1) as f64 * self.width;
            let m = rate * (edge - left).max(0.0);
            self.masses[i] += m;
            spent += m;
            left = edge;
        }
        // remainder keeps the segment total exact
        self.masses[i1] += tau - spent;
    }
}

/// Bin width actually used for a requested width: on an interval of length
/// `b` it is snapped to `b / round(b / width)`.
pub fn effective_bin_width(domain: &DomainSpec, width: f64) -> f64 {
    match *domain {
        DomainSpec::Interval { b, .. } => b / ((b / width).round()).max(1.0),
        _ => width,
    }
}

fn bin_layout(domain: &DomainSpec, free: &[f64], positions: &[f64], width: f64) -> (f64, f64, usize) {
    match *domain {
        DomainSpec::Interval { b, .. } => {
            let w = effective_bin_width(domain, width);
            (0.0, w, (b / w).round() as usize)
        }
        DomainSpec::HalfLine { .. } => {
            let hi = free.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            (0.0, width, ((hi / width).floor() as usize + 1).max(1))
        }
        DomainSpec::FullLine => {
            let lo = positions.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = positions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let k0 = (lo / width).floor();
            let k1 = (hi / width).floor();
            (k0 * width, width, (k1 - k0) as usize + 1)
        }
    }
}

/// Interior occupation of the folded free interpolant on bins of width
/// `spec.bin_width` (snapped to divide `b` on an interval), together with
/// boundary local times over the window `spec.window()`.
pub fn local_time_with(path: &BridgePath, spec: &LocalTimeSpec) -> Result<LocalTimeProfile> {
    local_time_inner(path, spec, false)
}

/// As [`local_time_with`], leaving boundary local times at Dirichlet
/// boundaries unset (their weight is carried by the survival indicator).
pub(crate) fn local_time_for_weights(path: &BridgePath, spec: &LocalTimeSpec) -> Result<LocalTimeProfile> {
    local_time_inner(path, spec, true)
}

fn local_time_inner(path: &BridgePath, spec: &LocalTimeSpec, skip_dirichlet: bool) -> Result<LocalTimeProfile> {
    if !(spec.bin_width > 0.0) {
        return invalid("bin width must be positive");
    }
    let domain = path.domain();
    let free = path.free_positions();
    let (first_edge, width, m) = bin_layout(domain, free, path.positions(), spec.bin_width);
    let mut bins = Bins {
        first_edge,
        width,
        masses: vec![0.0; m],
    };
    let dt = path.dt();
    match *domain {
        DomainSpec::FullLine => {
            for w in free.windows(2) {
                bins.deposit(w[0], w[1], dt);
            }
        }
        DomainSpec::HalfLine { .. } => {
            for w in free.windows(2) {
                let (p, q) = (w[0], w[1]);
                if (p < 0.0) == (q < 0.0) || p == 0.0 || q == 0.0 {
                    bins.deposit(p.abs(), q.abs(), dt);
                } else {
                    let f = p.abs() / (p.abs() + q.abs());
                    bins.deposit(p.abs(), 0.0, dt * f);
                    bins.deposit(0.0, q.abs(), dt - dt * f);
                }
            }
        }
        DomainSpec::Interval { b, .. } => {
            for w in free.windows(2) {
                let (p, q) = (w[0], w[1]);
                let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
                let k0 = (lo / b).floor() as i64 + 1;
                let k1 = (hi / b).ceil() as i64 - 1;
                if k0 > k1 {
                    bins.deposit(domain.fold(p), domain.fold(q), dt);
                    continue;
                }
                // split at the reflection points k b strictly inside (lo, hi)
                let fold_pt = |k: i64| if k.rem_euclid(2) == 0 { 0.0 } else { b };
                let rate = dt / (hi - lo);
                let mut spent = 0.0;
                let mut left = lo;
                let mut left_img = domain.fold(lo);
                for k in k0..=k1 {
                    let x = k as f64 * b;
                    if x <= left {
                        continue;
                    }
                    let tau = rate * (x - left);
                    bins.deposit(left_img, fold_pt(k), tau);
                    spent += tau;
                    left = x;
                    left_img = fold_pt(k);
                }
                bins.deposit(left_img, domain.fold(hi), dt - spent);
            }
        }
    }
    let mut boundary = [0.0; 2];
    let mut hit = [false; 2];
    for (side, c, bc) in domain.boundaries() {
        if skip_dirichlet && bc.is_dirichlet() {
            continue;
        }
        boundary[side as usize] = boundary_local_time(path, c, spec.window(), spec.boundary_rule)?;
        hit[side as usize] = reaches(path, c);
    }
    Ok(LocalTimeProfile {
        first_edge: bins.first_edge,
        width: bins.width,
        masses: bins.masses,
        horizon: path.horizon(),
        boundary,
        hit,
    })
}

/// [`local_time_with`] using the default boundary window and rule.
pub fn local_time(path: &BridgePath, bin_width: f64) -> Result<LocalTimeProfile> {
    local_time_with(path, &LocalTimeSpec::new(bin_width))
}

fn images_near(domain: &DomainSpec, c: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    out.clear();
    match domain.image_period() {
        None => {
            if c >= lo && c <= hi {
                out.push(c);
            }
        }
        Some(per) => {
            let mut m = c + ((lo - c) / per).ceil() * per;
            while m <= hi {
                out.push(m);
                m += per;
            }
        }
    }
}

fn reaches(path: &BridgePath, c: f64) -> bool {
    let domain = path.domain();
    let mut imgs = Vec::new();
    path.free_positions().windows(2).any(|w| {
        images_near(domain, c, w[0].min(w[1]), w[0].max(w[1]), &mut imgs);
        !imgs.is_empty()
    })
}

/// Expected occupation density at level 0 of a Brownian bridge of duration
/// `dt` from `a` to `c`:
/// `int_0^dt g_s(a) g_{dt-s}(c) ds / g_dt(c - a)`.
#[inline]
pub(crate) fn bridge_level_density(a: f64, c: f64, dt: f64) -> f64 {
    let s = a.abs() + c.abs();
    let d = c - a;
    let z = s / (2.0 * dt).sqrt();
    0.5 * (2.0 * PI * dt).sqrt() * ((d * d - s * s) / (2.0 * dt)).exp() * erfcx(z)
}

/// Expected occupation of `(-eps, eps)` by the bridge from `a` to `c`.
fn bridge_window_occupation(a: f64, c: f64, eps: f64, dt: f64, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
    let mut cuts = [-eps, a, c, eps];
    cuts[1..3].sort_by(f64::total_cmp);
    let mut s = 0.0;
    for w in cuts.windows(2) {
        let lo = w[0].clamp(-eps, eps);
        let hi = w[1].clamp(-eps, eps);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, q) in gl.0.iter().zip(&gl.1) {
            let u = mid + half * x;
            s += half * q * bridge_level_density(a - u, c - u, dt);
        }
    }
    s
}

/// Boundary local time `(1 / 2 eps) * occupation of (c - eps, c + eps)` of the
/// free path, summed over the images of `c`.
pub fn boundary_local_time(path: &BridgePath, c: f64, eps: f64, rule: BoundaryRule) -> Result<f64> {
    let domain = path.domain();
    if matches!(domain, DomainSpec::FullLine) {
        return invalid("the full line has no boundary");
    }
    if domain.side_of(c).is_none() {
        return invalid(format!("{c} is not a boundary point of the domain"));
    }
    if !(eps > 0.0) {
        return invalid("boundary window must be positive");
    }
    let dt = path.dt();
    let free = path.free_positions();
    let mut imgs = Vec::new();
    let mut occ = 0.0;
    match rule {
        BoundaryRule::LinearInterpolant => {
            for w in free.windows(2) {
                let (lo, hi) = (w[0].min(w[1]), w[0].max(w[1]));
                images_near(domain, c, lo - eps, hi + eps, &mut imgs);
                for &m in &imgs {
                    if hi == lo {
                        if (lo - m).abs() < eps {
                            occ += dt;
                        }
                    } else {
                        let overlap = (hi.min(m + eps) - lo.max(m - eps)).max(0.0);
                        occ += dt * overlap / (hi - lo);
                    }
                }
            }
        }
        BoundaryRule::BridgeExpectation => {
            let gl = gauss_legendre_unit(4);
            let reach = eps + 9.0 * dt.sqrt();
            for w in free.windows(2) {
                let (lo, hi) = (w[0].min(w[1]), w[0].max(w[1]));
                images_near(domain, c, lo - reach, hi + reach, &mut imgs);
                for &m in &imgs {
                    let (a, b) = (w[0] - m, w[1] - m);
                    let same_side = (a > eps && b > eps) || (a < -eps && b < -eps);
                    if same_side && 2.0 * (a.abs() - eps) * (b.abs() - eps) > 40.0 * dt {
                        continue;
                    }
                    occ += bridge_window_occupation(a, b, eps, dt, &gl);
                }
            }
        }
    }
    Ok(occ / (2.0 * eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::Boundary;
    use crate::quad::{integrate, Tolerance};
    use crate::special::gaussian_kernel;

    #[test]
    fn constant_path_fills_one_bin() {
        let p = BridgePath::from_free(DomainSpec::FullLine, 1.0, vec![0.37; 11]).unwrap();
        let l = local_time(&p, 0.1).unwrap();
        let nz: Vec<_> = l.masses().iter().filter(|&&m| m != 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert!((nz[0] - 1.0).abs() < 1e-12);
        let j = l.masses().iter().position(|&m| m != 0.0).unwrap();
        let e = l.edges();
        assert!(e[j] <= 0.37 && 0.37 < e[j + 1]);
    }

    #[test]
    fn linear_sweep_is_uniform() {
        let n = 1000;
        let free: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let d = DomainSpec::Interval {
            b: 1.0,
            bc0: Boundary::Robin(0.0),
            bcb: Boundary::Robin(0.0),
        };
        let p = BridgePath::from_free(d, 1.0, free).unwrap();
        let l = local_time(&p, 0.1).unwrap();
        assert_eq!(l.masses().len(), 10);
        for m in l.masses() {
            assert!((m - 0.1).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn total_mass_is_horizon_on_folded_paths() {
        let d = DomainSpec::Interval {
            b: 0.7,
            bc0: Boundary::Dirichlet,
            bcb: Boundary::Robin(1.0),
        };
        let free = vec![0.3, 1.9, -2.2, -0.1, 0.6, 3.4, 3.4, 0.2];
        let p = BridgePath::from_free(d, 2.5, free.clone()).unwrap();
        let l = local_time(&p, 0.05).unwrap();
        assert!((l.total() - 2.5).abs() < 1e-12);
        assert!(l.masses().iter().all(|&m| m >= 0.0));
        let h = BridgePath::from_free(DomainSpec::half_line_dirichlet(), 2.5, free).unwrap();
        assert!((local_time(&h, 0.05).unwrap().total() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn snapped_bins_tile_interval() {
        let d = DomainSpec::dirichlet_box(1.0);
        let p = BridgePath::from_free(d, 1.0, vec![0.5, 0.6]).unwrap();
        let l = local_time(&p, 0.03).unwrap();
        let e = l.edges();
        assert_eq!(e[0], 0.0);
        assert!((e[e.len() - 1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bridge_level_density_matches_time_integral() {
        for &(a, c, dt) in &[
            (0.0, 0.0, 1.0),
            (0.1, -0.3, 0.5),
            (0.2, 0.25, 0.01),
            (-0.05, -0.01, 0.001),
        ] {
            // s = dt sin^2(th) removes the endpoint singularities
            let g = |th: f64| {
                let (sn, cs) = (th.sin(), th.cos());
                let s = dt * sn * sn;
                gaussian_kernel(s, a) * gaussian_kernel(dt * cs * cs, c) * 2.0 * dt * sn * cs
            };
            let (num, _) = integrate(g, 0.0, std::f64::consts::FRAC_PI_2, Tolerance::default()).unwrap();
            let want = num / gaussian_kernel(dt, c - a);
            let got = bridge_level_density(a, c, dt);
            assert!(
                (got - want).abs() < 1e-8 * want.max(1e-300),
                "{a} {c} {dt}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn boundary_window_without_visit_is_zero() {
        let d = DomainSpec::half_line_dirichlet();
        let free: Vec<f64> = (0..=100).map(|i| 2.0 + 0.1 * (i as f64).sin()).collect();
        let p = BridgePath::from_free(d, 1.0, free).unwrap();
        for rule in [BoundaryRule::LinearInterpolant, BoundaryRule::BridgeExpectation] {
            assert_eq!(boundary_local_time(&p, 0.0, 0.01, rule).unwrap(), 0.0);
        }
        assert!(boundary_local_time(&p, 0.5, 0.01, BoundaryRule::LinearInterpolant).is_err());
        let f = BridgePath::from_free(DomainSpec::FullLine, 1.0, vec![0.0, 1.0]).unwrap();
        assert!(boundary_local_time(&f, 0.0, 0.01, BoundaryRule::LinearInterpolant).is_err());
    }

    #[test]
    fn linear_crossing_is_window_proportional() {
        let n = 1000;
        let free: Vec<f64> = (0..=n).map(|i| -0.5 + i as f64 / n as f64).collect();
        let d = DomainSpec::half_line_dirichlet();
        let p = BridgePath::from_free(d, 1.0, free).unwrap();
        let a = boundary_local_time(&p, 0.0, 0.01, BoundaryRule::LinearInterpolant).unwrap();
        let b = boundary_local_time(&p, 0.0, 0.02, BoundaryRule::LinearInterpolant).unwrap();
        assert!((a - b).abs() < 2.0 * p.dt());
        assert!((a - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hit_flags() {
        let d = DomainSpec::dirichlet_box(1.0);
        let p = BridgePath::from_free(d, 1.0, vec![0.5, 1.2, 0.4]).unwrap();
        let l = local_time(&p, 0.1).unwrap();
        assert!(l.hit(Side::Right));
        assert!(!l.hit(Side::Left));
    }
}
