use serde::{Deserialize, Serialize};

use crate::error::{invalid, FieldError, Result};

/// Boundary condition at an endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// `f(c) = 0`.
    Dirichlet,
    /// `f'(c) + alpha f(c) = 0` at the left end (`f'(b) - beta f(b) = 0` at the right end).
    Robin(f64),
}

impl Boundary {
    /// The weight multiplying the boundary local time in the path exponent;
    /// `-inf` for Dirichlet.
    pub fn effective_weight(self) -> f64 {
        match self {
            Boundary::Dirichlet => f64::NEG_INFINITY,
            Boundary::Robin(a) => a,
        }
    }

    pub fn is_dirichlet(self) -> bool {
        matches!(self, Boundary::Dirichlet)
    }
}

/// The spatial domain and its boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRecord", into = "DomainRecord")]
pub enum DomainSpec {
    FullLine,
    HalfLine { bc0: Boundary },
    Interval { b: f64, bc0: Boundary, bcb: Boundary },
}

/// A boundary point of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl DomainSpec {
    pub fn half_line_dirichlet() -> Self {
        DomainSpec::HalfLine {
            bc0: Boundary::Dirichlet,
        }
    }

    pub fn dirichlet_box(b: f64) -> Self {
        DomainSpec::Interval {
            b,
            bc0: Boundary::Dirichlet,
            bcb: Boundary::Dirichlet,
        }
    }

    pub fn field_errors(&self, prefix: &str) -> Vec<FieldError> {
        let mut out = Vec::new();
        let finite = |v: f64| v.is_finite();
        match *self {
            DomainSpec::FullLine => {}
            DomainSpec::HalfLine { bc0 } => {
                if let Boundary::Robin(a) = bc0 {
                    if !finite(a) {
                        out.push(FieldError::new(format!("{prefix}alpha"), "must be finite"));
                    }
                }
            }
            DomainSpec::Interval { b, bc0, bcb } => {
                if !(b > 0.0 && b.is_finite()) {
                    out.push(FieldError::new(
                        format!("{prefix}b"),
                        "interval length must be positive",
                    ));
                }
                if let Boundary::Robin(a) = bc0 {
                    if !finite(a) {
                        out.push(FieldError::new(format!("{prefix}alpha"), "must be finite"));
                    }
                }
                if let Boundary::Robin(a) = bcb {
                    if !finite(a) {
                        out.push(FieldError::new(format!("{prefix}beta"), "must be finite"));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.field_errors("").into_iter().next() {
            None => Ok(()),
            Some(e) => invalid(e.to_string()),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, DomainSpec::Interval { .. })
    }

    /// `(lower, upper)` ends of the closure; `None` for an infinite end.
    pub fn ends(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            DomainSpec::FullLine => (None, None),
            DomainSpec::HalfLine { .. } => (Some(0.0), None),
            DomainSpec::Interval { b, .. } => (Some(0.0), Some(b)),
        }
    }

    pub fn boundary(&self, side: Side) -> Option<Boundary> {
        match (*self, side) {
            (DomainSpec::HalfLine { bc0 }, Side::Left) => Some(bc0),
            (DomainSpec::Interval { bc0, .. }, Side::Left) => Some(bc0),
            (DomainSpec::Interval { bcb, .. }, Side::Right) => Some(bcb),
            _ => None,
        }
    }

    /// Boundary points with their conditions.
    pub fn boundaries(&self) -> Vec<(Side, f64, Boundary)> {
        match *self {
            DomainSpec::FullLine => vec![],
            DomainSpec::HalfLine { bc0 } => vec![(Side::Left, 0.0, bc0)],
            DomainSpec::Interval { b, bc0, bcb } => {
                vec![(Side::Left, 0.0, bc0), (Side::Right, b, bcb)]
            }
        }
    }

    /// Which side the abscissa `c` is, if it is a boundary point.
    pub fn side_of(&self, c: f64) -> Option<Side> {
        self.boundaries()
            .into_iter()
            .find(|&(_, p, _)| p == c)
            .map(|(s, _, _)| s)
    }

    /// Effective weights `(alpha_bar, beta_bar)`; `0` where there is no boundary.
    pub fn effective_weights(&self) -> (f64, f64) {
        let w = |s| self.boundary(s).map_or(0.0, Boundary::effective_weight);
        (w(Side::Left), w(Side::Right))
    }

    pub fn has_dirichlet(&self) -> bool {
        self.boundaries().iter().any(|(_, _, bc)| bc.is_dirichlet())
    }

    /// Open domain membership.
    pub fn contains_open(&self, x: f64) -> bool {
        match self.ends() {
            (None, None) => x.is_finite(),
            (Some(lo), None) => x > lo && x.is_finite(),
            (Some(lo), Some(hi)) => x > lo && x < hi,
            (None, Some(_)) => unreachable!(),
        }
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        match self.ends() {
            (None, None) => x.is_finite(),
            (Some(lo), None) => x >= lo && x.is_finite(),
            (Some(lo), Some(hi)) => x >= lo && x <= hi,
            (None, Some(_)) => unreachable!(),
        }
    }

    /// Accepts an endpoint in the closure unless it sits on a Dirichlet boundary.
    pub(crate) fn check_endpoint(&self, name: &str, x: f64) -> Result<()> {
        if !self.contains_closed(x) {
            return invalid(format!("{name} = {x} lies outside the domain"));
        }
        if let Some(side) = self.side_of(x) {
            if self.boundary(side) == Some(Boundary::Dirichlet) {
                return invalid(format!("{name} = {x} lies on a Dirichlet boundary"));
            }
        }
        Ok(())
    }

    /// Image of an unfolded (free) position under the reflection coupling.
    #[inline]
    pub fn fold(&self, x: f64) -> f64 {
        match *self {
            DomainSpec::FullLine => x,
            DomainSpec::HalfLine { .. } => x.abs(),
            DomainSpec::Interval { b, .. } => {
                let r = x.rem_euclid(2.0 * b);
                if r > b {
                    2.0 * b - r
                } else {
                    r
                }
            }
        }
    }

    /// Period of the image lattice of a boundary point (`None` if a single image).
    pub(crate) fn image_period(&self) -> Option<f64> {
        match *self {
            DomainSpec::Interval { b, .. } => Some(2.0 * b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CaseTag {
    FullLine,
    HalfLine,
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BcTag {
    Dirichlet,
    Robin,
}

/// Flat JSON form `{case, b, bc0, bcb, alpha, beta}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainRecord {
    case: CaseTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bc0: Option<BcTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bcb: Option<BcTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

fn to_boundary(
    tag: Option<BcTag>,
    weight: Option<f64>,
    name: &str,
    wname: &str,
) -> std::result::Result<Boundary, String> {
    match tag {
        None => Err(format!("{name} is required")),
        Some(BcTag::Dirichlet) => Ok(Boundary::Dirichlet),
        Some(BcTag::Robin) => weight
            .map(Boundary::Robin)
            .ok_or_else(|| format!("{wname} is required for a Robin condition")),
    }
}

impl TryFrom<DomainRecord> for DomainSpec {
    type Error = String;

    fn try_from(r: DomainRecord) -> std::result::Result<Self, String> {
        Ok(match r.case {
            CaseTag::FullLine => DomainSpec::FullLine,
            CaseTag::HalfLine => DomainSpec::HalfLine {
                bc0: to_boundary(r.bc0, r.alpha, "bc0", "alpha")?,
            },
            CaseTag::Interval => DomainSpec::Interval {
                b: r.b.ok_or("b is required for an interval")?,
                bc0: to_boundary(r.bc0, r.alpha, "bc0", "alpha")?,
                bcb: to_boundary(r.bcb, r.beta, "bcb", "beta")?,
            },
        })
    }
}

fn split(bc: Boundary) -> (Option<BcTag>, Option<f64>) {
    match bc {
        Boundary::Dirichlet => (Some(BcTag::Dirichlet), None),
        Boundary::Robin(a) => (Some(BcTag::Robin), Some(a)),
    }
}

impl From<DomainSpec> for DomainRecord {
    fn from(d: DomainSpec) -> Self {
        let mut r = DomainRecord {
            case: CaseTag::FullLine,
            b: None,
            bc0: None,
            bcb: None,
            alpha: None,
            beta: None,
        };
        match d {
            DomainSpec::FullLine => {}
            DomainSpec::HalfLine { bc0 } => {
                r.case = CaseTag::HalfLine;
                (r.bc0, r.alpha) = split(bc0);
            }
            DomainSpec::Interval { b, bc0, bcb } => {
                r.case = CaseTag::Interval;
                r.b = Some(b);
                (r.bc0, r.alpha) = split(bc0);
                (r.bcb, r.beta) = split(bcb);
            }
        }
        r
    }
}
