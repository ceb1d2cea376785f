//! Expression and domain documents for `prove` / `replay`.
//!
//! A domain document is flat TOML:
//!
//! ```toml
//! bounds = [["2", "2.51"], ["2", "2.51"], ["2", "2.51"]]
//!
//! [[constraints]]          # optional: coeffs · x <= rhs
//! coeffs = ["1", "1", "0"]
//! rhs = "4.8"
//! ```
//!
//! String entries are exact decimals, rounded outward; bare numbers are taken
//! as binary64 values.

use std::path::Path;

use kepler_core::prover::{parse_expr, BoxDomain, Decimal, Expr, LinearConstraint};
use kepler_core::Interval;
use serde::Deserialize;

use crate::{HarnessError, Result};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Num {
    Text(String),
    Float(f64),
    Int(i64),
}

impl Num {
    fn interval(&self) -> Result<Interval> {
        match self {
            Num::Text(t) => Interval::from_decimal(t).map_err(|e| HarnessError::usage(format!("`{t}`: {e}"))),
            Num::Float(x) => Ok(Interval::point(*x)),
            Num::Int(n) => Ok(Interval::point(*n as f64)),
        }
    }

    fn decimal(&self) -> Result<Decimal> {
        match self {
            Num::Text(t) => Decimal::parse(t).ok_or_else(|| HarnessError::usage(format!("bad decimal `{t}`"))),
            Num::Float(x) => Ok(Decimal::from_f64(*x)),
            Num::Int(n) => Ok(Decimal::from_f64(*n as f64)),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    coeffs: Vec<Num>,
    rhs: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainDoc {
    bounds: Vec<[Num; 2]>,
    #[serde(default)]
    constraints: Vec<ConstraintDoc>,
}

pub fn parse_domain(text: &str) -> Result<BoxDomain> {
    let doc: DomainDoc = toml::from_str(text).map_err(|e| HarnessError::usage(format!("domain: {e}")))?;
    let mut bounds = Vec::with_capacity(doc.bounds.len());
    for (k, [lo, hi]) in doc.bounds.iter().enumerate() {
        let (lo, hi) = (lo.interval()?.lo(), hi.interval()?.hi());
        bounds.push(Interval::new(lo, hi).map_err(|_| HarnessError::usage(format!("domain: empty bounds in dimension {k}")))?);
    }
    let mut d = BoxDomain::new(bounds);
    for c in &doc.constraints {
        d.constraints.push(LinearConstraint {
            coeffs: c.coeffs.iter().map(Num::decimal).collect::<Result<_>>()?,
            rhs: c.rhs.decimal()?,
        });
    }
    d.validate().map_err(|e| HarnessError::usage(format!("domain: {e}")))?;
    Ok(d)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::usage(format!("{}: {e}", path.display())))
}

pub fn load_expr(path: &Path) -> Result<Expr> {
    parse_expr(&read(path)?).map_err(|e| HarnessError::usage(format!("{}:{e}", path.display())))
}

pub fn load_domain(path: &Path) -> Result<BoxDomain> {
    parse_domain(&read(path)?).map_err(|e| HarnessError::usage(format!("{}: {e}", path.display())))
}

/// Target as a float no smaller than the decimal, so a proof covers the decimal claim.
pub fn parse_target(text: &str) -> Result<f64> {
    let t = Interval::from_decimal(text).map_err(|e| HarnessError::usage(format!("target `{text}`: {e}")))?;
    if !t.is_bounded() {
        return Err(HarnessError::usage(format!("target `{text}` out of range")));
    }
    Ok(t.hi())
}
