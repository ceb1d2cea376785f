//! Search domains: a box, optionally cut by linear constraints `Σ a_i x_i <= b`.

use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decimal::{format_f64, parse_rational, rational_from_f64};
use crate::interval::Interval;

/// A decimal number kept both as text and as its exact value.
#[derive(Debug, Clone, PartialEq)]
pub struct Decimal {
    text: String,
    value: BigRational,
}

impl Decimal {
    pub fn parse(text: &str) -> Option<Decimal> {
        parse_rational(text).ok().map(|value| Decimal {
            text: text.trim().to_string(),
            value,
        })
    }

    pub fn from_f64(x: f64) -> Decimal {
        Decimal {
            text: format_f64(x),
            value: rational_from_f64(x),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Decimal::parse(&text).ok_or_else(|| serde::de::Error::custom(format!("bad decimal `{text}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<Decimal>,
    pub rhs: Decimal,
}

impl LinearConstraint {
    pub fn new(coeffs: &[f64], rhs: f64) -> LinearConstraint {
        LinearConstraint {
            coeffs: coeffs.iter().map(|&c| Decimal::from_f64(c)).collect(),
            rhs: Decimal::from_f64(rhs),
        }
    }

    /// Floating-point check with a small tolerance, for sample points only.
    pub fn holds_approx(&self, x: &[f64]) -> bool {
        let lhs: f64 = self
            .coeffs
            .iter()
            .zip(x)
            .map(|(c, xi)| c.text.parse::<f64>().unwrap_or(f64::NAN) * xi)
            .sum();
        let rhs: f64 = self.rhs.text.parse().unwrap_or(f64::NAN);
        lhs <= rhs + 1e-12 * (1.0 + rhs.abs())
    }
}

/// Box bounds as exact binary64 `[lo, hi]` pairs. Certificates need bit-exact
/// boxes, so the outward-rounding decimal form of [`Interval`] is not used.
pub mod exact_bounds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::interval::Interval;

    pub fn serialize<S: Serializer>(b: &[Interval], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = b.iter().map(|i| [i.lo(), i.hi()]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Interval>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        pairs
            .into_iter()
            .map(|[lo, hi]| Interval::new(lo, hi).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    #[serde(with = "exact_bounds")]
    pub bounds: Vec<Interval>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("domain has no dimensions")]
    Empty,
    #[error("bounds of dimension {0} are not finite")]
    Unbounded(usize),
    #[error("constraint {0} has {1} coefficients, expected {2}")]
    ConstraintArity(usize, usize, usize),
}

impl BoxDomain {
    pub fn new(bounds: Vec<Interval>) -> BoxDomain {
        BoxDomain {
            bounds,
            constraints: Vec::new(),
        }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<BoxDomain, crate::IntervalError> {
        let bounds = pairs
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<_, _>>()?;
        Ok(BoxDomain::new(bounds))
    }

    pub fn with_constraint(mut self, c: LinearConstraint) -> BoxDomain {
        self.constraints.push(c);
        self
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.bounds.is_empty() {
            return Err(DomainError::Empty);
        }
        if let Some(k) = self.bounds.iter().position(|b| !b.is_bounded()) {
            return Err(DomainError::Unbounded(k));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.dim() {
                return Err(DomainError::ConstraintArity(k, c.coeffs.len(), self.dim()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn has_constraints(&self) -> bool {
        !self.constraints.is_empty()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.bounds.iter().map(Interval::mid).collect()
    }

    /// Widest dimension, ties broken towards the lowest index.
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        for (k, b) in self.bounds.iter().enumerate() {
            if b.width() > self.bounds[best].width() {
                best = k;
            }
        }
        best
    }

    /// Split at the midpoint of dimension `dim`; `None` when it cannot shrink.
    pub fn split(&self, dim: usize) -> Option<(f64, BoxDomain, BoxDomain)> {
        let b = self.bounds[dim];
        let m = b.mid();
        if !(b.lo() < m && m < b.hi()) {
            return None;
        }
        let (left, right) = self.split_at(dim, m)?;
        Some((m, left, right))
    }

    pub fn split_at(&self, dim: usize, at: f64) -> Option<(BoxDomain, BoxDomain)> {
        let b = *self.bounds.get(dim)?;
        let mut left = self.clone();
        let mut right = self.clone();
        left.bounds[dim] = Interval::new(b.lo(), at).ok()?;
        right.bounds[dim] = Interval::new(at, b.hi()).ok()?;
        Some((left, right))
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.bounds.iter().zip(x).all(|(b, xi)| b.contains(*xi))
    }

    pub fn satisfies_constraints_approx(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.holds_approx(x))
    }

    pub fn point_box(x: &[f64]) -> Vec<Interval> {
        x.iter().map(|&xi| Interval::point(xi)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widest_and_split() {
        let d = BoxDomain::from_pairs(&[(0.0, 1.0), (0.0, 2.0), (5.0, 7.0)]).unwrap();
        assert_eq!(d.widest_dim(), 1);
        let (m, l, r) = d.split(1).unwrap();
        assert_eq!(m, 1.0);
        assert_eq!(l.bounds[1], Interval::new(0.0, 1.0).unwrap());
        assert_eq!(r.bounds[1], Interval::new(1.0, 2.0).unwrap());
        let p = BoxDomain::from_pairs(&[(1.0, 1.0)]).unwrap();
        assert!(p.split(0).is_none());
    }

    #[test]
    fn serde_round_trip() {
        let d = BoxDomain::from_pairs(&[(0.0, 1.5), (-2.0, 2.0)])
            .unwrap()
            .with_constraint(LinearConstraint {
                coeffs: vec![Decimal::parse("1").unwrap(), Decimal::parse("0.1").unwrap()],
                rhs: Decimal::parse("1.2").unwrap(),
            });
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"0.1\""));
        let back: BoxDomain = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert!(d.validate().is_ok());
        assert!(d.satisfies_constraints_approx(&[1.0, 2.0]));
        assert!(!d.satisfies_constraints_approx(&[1.5, 2.0]));
    }
}
