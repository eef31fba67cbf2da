use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FieldError, Result};
use crate::paths::DomainSpec;

/// The shape of the deterministic potential `V`.
#[derive(Clone)]
pub enum PotentialKind {
    Zero,
    /// `V(x) = x`, for the half line.
    Linear,
    /// `V(x) = x^2 / 2`.
    Harmonic,
    /// Linear interpolation of tabulated values, constant beyond the table.
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
    Callable(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Zero => write!(f, "Zero"),
            PotentialKind::Linear => write!(f, "Linear"),
            PotentialKind::Harmonic => write!(f, "Harmonic"),
            PotentialKind::Tabulated { grid, .. } => write!(f, "Tabulated({} points)", grid.len()),
            PotentialKind::Callable(_) => write!(f, "Callable"),
        }
    }
}

/// A nonnegative potential plus a constant `offset`.
///
/// The offset enters every estimator as the exact factor `exp(-offset t)`
/// applied after averaging, so shifting a potential by a constant rescales
/// estimates without touching the sampled paths.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub offset: f64,
    /// Asserts the growth condition that makes traces finite on unbounded domains.
    pub growth_certificate: bool,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self::from_kind(PotentialKind::Zero, false)
    }

    pub fn linear() -> Self {
        Self::from_kind(PotentialKind::Linear, true)
    }

    pub fn harmonic() -> Self {
        Self::from_kind(PotentialKind::Harmonic, true)
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return invalid("a tabulated potential needs matching grid and values of length >= 2");
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("tabulated potential grid must be strictly increasing");
        }
        Ok(Self::from_kind(PotentialKind::Tabulated { grid, values }, false))
    }

    pub fn callable(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_kind(PotentialKind::Callable(Arc::new(f)), false)
    }

    fn from_kind(kind: PotentialKind, growth_certificate: bool) -> Self {
        PotentialSpec {
            kind,
            offset: 0.0,
            growth_certificate,
        }
    }

    pub fn with_certificate(mut self, ok: bool) -> Self {
        self.growth_certificate = ok;
        self
    }

    /// `V + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.offset += c;
        s
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// `V(x)` without the offset.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Linear => x,
            PotentialKind::Harmonic => 0.5 * x * x,
            PotentialKind::Tabulated { grid, values } => interpolate(grid, values, x),
            PotentialKind::Callable(f) => f(x),
        }
    }

    /// `V(x) + offset`.
    pub fn eval_shifted(&self, x: f64) -> f64 {
        self.eval(x) + self.offset
    }

    /// A lower bound for `V` on the domain outside `[-r, r]`, when known.
    pub fn inf_beyond(&self, domain: &DomainSpec, r: f64) -> Option<f64> {
        match &self.kind {
            PotentialKind::Zero => Some(0.0),
            PotentialKind::Linear => Some(r),
            PotentialKind::Harmonic => Some(0.5 * r * r),
            PotentialKind::Tabulated { grid, values } => {
                let lo_side = !matches!(domain, DomainSpec::HalfLine { .. });
                let mut m = f64::INFINITY;
                for (x, v) in grid.iter().zip(values) {
                    if *x >= r || (lo_side && *x <= -r) {
                        m = m.min(*v);
                    }
                }
                m = m.min(values[values.len() - 1]);
                if lo_side {
                    m = m.min(values[0]);
                }
                Some(m)
            }
            PotentialKind::Callable(_) => None,
        }
    }

    pub fn field_errors(&self, domain: &DomainSpec, prefix: &str) -> Vec<FieldError> {
        let mut out = Vec::new();
        if !self.offset.is_finite() {
            out.push(FieldError::new(format!("{prefix}offset"), "must be finite"));
        }
        match &self.kind {
            PotentialKind::Linear if matches!(domain, DomainSpec::FullLine) => {
                out.push(FieldError::new(
                    format!("{prefix}kind"),
                    "the linear potential is negative on the full line",
                ));
            }
            PotentialKind::Tabulated { values, .. } => {
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    out.push(FieldError::new(
                        format!("{prefix}values"),
                        "tabulated potential must be finite and nonnegative",
                    ));
                }
            }
            _ => {}
        }
        if !domain.is_bounded() && !self.growth_certificate && !self.is_zero() {
            out.push(FieldError::new(
                format!("{prefix}growth_certificate"),
                "unbounded domains need a growth certificate for this potential",
            ));
        }
        out
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        match self.field_errors(domain, "").into_iter().next() {
            None => Ok(()),
            Some(e) => invalid(e.to_string()),
        }
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return values[0];
    }
    let n = grid.len();
    if x >= grid[n - 1] {
        return values[n - 1];
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    let f = (x - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] + f * (values[i + 1] - values[i])
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Zero,
    Linear,
    Harmonic,
    Tabulated,
}

/// Serialized form `{kind, grid, values, offset, growth_certificate}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialRecord {
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default)]
    offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    growth_certificate: Option<bool>,
}

impl Serialize for PotentialSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, grid, values) = match &self.kind {
            PotentialKind::Zero => (KindTag::Zero, None, None),
            PotentialKind::Linear => (KindTag::Linear, None, None),
            PotentialKind::Harmonic => (KindTag::Harmonic, None, None),
            PotentialKind::Tabulated { grid, values } => (KindTag::Tabulated, Some(grid.clone()), Some(values.clone())),
            PotentialKind::Callable(_) => {
                return Err(serde::ser::Error::custom("callable potentials are not serializable"))
            }
        };
        PotentialRecord {
            kind,
            grid,
            values,
            offset: self.offset,
            growth_certificate: Some(self.growth_certificate),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PotentialSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PotentialRecord::deserialize(d)?;
        let mut p = match r.kind {
            KindTag::Zero => PotentialSpec::zero(),
            KindTag::Linear => PotentialSpec::linear(),
            KindTag::Harmonic => PotentialSpec::harmonic(),
            KindTag::Tabulated => {
                let grid = r.grid.ok_or_else(|| serde::de::Error::missing_field("grid"))?;
                let values = r.values.ok_or_else(|| serde::de::Error::missing_field("values"))?;
                PotentialSpec::tabulated(grid, values).map_err(serde::de::Error::custom)?
            }
        };
        p.offset = r.offset;
        if let Some(c) = r.growth_certificate {
            p.growth_certificate = c;
        }
        Ok(p)
    }
}
