use super::potential::PotentialSpec;
use crate::error::{invalid, Result};
use crate::noise::{mollified_derivative, GridNoisePath, MollifierSpec};
use crate::paths::{effective_bin_width, DomainSpec, LocalTimeProfile};

/// `Xi'_eps` tabulated at the bin centers `(k + 1/2) w` of the local-time
/// lattice, so that `<L, Xi'_eps>` is a midpoint sum without interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterTable {
    k0: i64,
    width: f64,
    values: Vec<f64>,
}

impl CenterTable {
    /// Tabulates every center whose mollification window fits inside the
    /// noise span. `bin_width` is the requested width before snapping.
    pub fn build(noise: &GridNoisePath, m: &MollifierSpec, domain: &DomainSpec, bin_width: f64) -> Result<Self> {
        m.validate()?;
        let w = effective_bin_width(domain, bin_width);
        let (lo, hi) = noise.span();
        let k0 = ((lo + m.epsilon) / w - 0.5).ceil() as i64;
        let k1 = ((hi - m.epsilon) / w - 0.5).floor() as i64;
        if k1 < k0 {
            return invalid("noise span is too short for the mollifier width");
        }
        let centers: Vec<f64> = (k0..=k1).map(|k| (k as f64 + 0.5) * w).collect();
        let values = mollified_derivative(noise, m, &centers)?;
        Ok(CenterTable { k0, width: w, values })
    }

    pub fn from_values(k0: i64, width: f64, values: Vec<f64>) -> Self {
        CenterTable { k0, width, values }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| (self.k0 + i as i64) as f64 * self.width + 0.5 * self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum_j mass_j Xi'_eps(center_j)`; `None` if a visited bin is not tabulated.
    fn pair(&self, profile: &LocalTimeProfile) -> Option<f64> {
        let first = profile.first_index() - self.k0;
        let mut s = 0.0;
        for (j, m) in profile.masses().iter().enumerate() {
            if *m == 0.0 {
                continue;
            }
            let i = first + j as i64;
            if i < 0 || i as usize >= self.values.len() {
                return None;
            }
            s += m * self.values[i as usize];
        }
        Some(s)
    }
}

/// The noise contribution to a path weight.
#[derive(Debug, Clone, Copy)]
pub enum NoiseTerm<'a> {
    Off,
    /// `xi(L_t)`, the pathwise integral of the local time against `Xi`.
    Raw(&'a GridNoisePath),
    /// `<L_t, Xi'_eps>` from a tabulated mollified derivative.
    Mollified(&'a CenterTable),
}

/// A potential and noise term defining the path functional
/// `exp(-<L_t, V> - noise + alpha_bar L^0 + beta_bar L^b)`.
#[derive(Debug, Clone, Copy)]
pub struct Weighting<'a> {
    pub potential: &'a PotentialSpec,
    pub noise: NoiseTerm<'a>,
}

impl<'a> Weighting<'a> {
    pub fn new(potential: &'a PotentialSpec, noise: NoiseTerm<'a>) -> Self {
        Weighting { potential, noise }
    }

    /// True when the exponent vanishes for every path.
    pub(crate) fn is_trivial(&self, domain: &DomainSpec) -> bool {
        self.potential.is_zero()
            && matches!(self.noise, NoiseTerm::Off)
            && domain.boundaries().iter().all(|(_, _, bc)| bc.is_dirichlet())
    }

    /// The exponent for a surviving path; `None` when the noise term cannot
    /// be evaluated on the profile's support.
    pub(crate) fn exponent(&self, profile: &LocalTimeProfile, domain: &DomainSpec) -> Option<f64> {
        let v = if self.potential.is_zero() {
            0.0
        } else {
            profile.pair_midpoint(|a| self.potential.eval(a))
        };
        let n = match self.noise {
            NoiseTerm::Off => 0.0,
            NoiseTerm::Raw(path) => profile.noise_integral(path)?,
            NoiseTerm::Mollified(table) => table.pair(profile)?,
        };
        let mut e = -v - n;
        for (side, _, bc) in domain.boundaries() {
            if !bc.is_dirichlet() {
                let w = bc.effective_weight();
                if w != 0.0 {
                    e += w * profile.boundary(side);
                }
            }
        }
        Some(e)
    }
}
