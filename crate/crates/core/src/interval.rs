//! Closed floating-point intervals with guaranteed containment.
//!
//! Endpoints are computed in round-to-nearest and then corrected with
//! error-free transformations (`two_sum`, `fma`) so that the lower bound is
//! rounded down and the upper bound is rounded up. When the error term cannot
//! be trusted (underflow range) the endpoint is pushed out by one ulp instead.
//! No global rounding-mode switch is involved, so the code is portable.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decimal::{self, ParseDecimalError};

/// Below this magnitude the fma/two-product error term may itself underflow.
const TINY: f64 = 1e-290;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum IntervalError {
    #[error("invalid interval bounds (NaN or lo > hi)")]
    InvalidBounds,
    #[error("square root of an interval lying entirely below zero")]
    Domain,
    #[error("divisor contains zero; result possibly unbounded")]
    PossiblyUnbounded,
    #[error("intervals do not intersect")]
    Empty,
}

/// Closed interval `[lo, hi]` with `lo <= hi` and no NaN bounds.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

// ---- directed rounding helpers -------------------------------------------

fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !a.is_finite() || !b.is_finite() {
        return s;
    }
    if s.is_infinite() {
        return if s > 0.0 { f64::MAX } else { s };
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    -add_down(-a, -b)
}

fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !a.is_finite() || !b.is_finite() {
        return p;
    }
    if p.is_infinite() {
        return if p > 0.0 { f64::MAX } else { p };
    }
    if p.abs() < TINY {
        return p.next_down();
    }
    let err = a.mul_add(b, -p);
    if err < 0.0 {
        p.next_down()
    } else {
        p
    }
}

fn mul_up(a: f64, b: f64) -> f64 {
    -mul_down(-a, b)
}

/// `a / b` rounded down; `b` must be nonzero.
fn div_down(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let q = a / b;
    if !a.is_finite() || !b.is_finite() {
        return q;
    }
    if q.is_infinite() {
        return if q > 0.0 { f64::MAX } else { q };
    }
    if q.abs() < TINY || a.abs() < TINY {
        return q.next_down();
    }
    // a = q*b + r exactly, so a/b - q has the sign of r/b.
    let r = (-q).mul_add(b, a);
    if (r < 0.0 && b > 0.0) || (r > 0.0 && b < 0.0) {
        q.next_down()
    } else {
        q
    }
}

fn div_up(a: f64, b: f64) -> f64 {
    -div_down(-a, b)
}

fn sqrt_down(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = x.sqrt();
    if x.is_infinite() {
        return f64::MAX;
    }
    if x < TINY {
        return s.next_down().max(0.0);
    }
    let r = (-s).mul_add(s, x);
    if r < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn sqrt_up(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = x.sqrt();
    if x.is_infinite() {
        return s;
    }
    if x < TINY {
        return s.next_up();
    }
    let r = (-s).mul_add(s, x);
    if r > 0.0 {
        s.next_up()
    } else {
        s
    }
}

fn pow_down_nonneg(x: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, _| mul_down(acc, x))
}

fn pow_up_nonneg(x: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, _| mul_up(acc, x))
}

// ---- the interval type ----------------------------------------------------

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        {
            return Err(IntervalError::InvalidBounds);
        }
        Ok(Interval { lo, hi })
    }

    /// Degenerate interval `[x, x]`. Panics on NaN.
    pub fn point(x: f64) -> Self {
        assert!(!x.is_nan(), "NaN cannot be an interval endpoint");
        Interval { lo: x, hi: x }
    }

    /// `[x - k ulp, x + k ulp]`.
    pub fn around(x: f64, ulps: u32) -> Self {
        let mut lo = x;
        let mut hi = x;
        for _ in 0..ulps {
            lo = lo.next_down();
            hi = hi.next_up();
        }
        Interval { lo, hi }
    }

    /// Smallest float interval containing the exact value of a decimal literal.
    pub fn from_decimal(text: &str) -> Result<Self, ParseDecimalError> {
        let q = decimal::parse_rational(text)?;
        let (lo, hi) = decimal::bracket_rational(&q);
        Ok(Interval { lo, hi })
    }

    /// Interval containing `√8`.
    pub fn sqrt8() -> Self {
        Interval::point(8.0).sqrt().expect("8 > 0")
    }

    /// Interval containing π (the float constant is within one ulp of π).
    pub fn pi() -> Self {
        Interval::around(std::f64::consts::PI, 1)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Upper bound on the distance from the midpoint to either end.
    pub fn rad(&self) -> f64 {
        let m = self.mid();
        (m - self.lo).max(self.hi - m).next_up()
    }

    /// Largest absolute value (rounded up, exact here since it is an endpoint).
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Interval) -> Result<Interval, IntervalError> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo > hi {
            Err(IntervalError::Empty)
        } else {
            Ok(Interval { lo, hi })
        }
    }

    /// True when the two intervals share at least one point.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.intersect(other).is_ok()
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval {
                lo: 0.0,
                hi: self.mag(),
            }
        }
    }

    /// Square root over `self ∩ [0, ∞)`.
    pub fn sqrt(&self) -> Result<Interval, IntervalError> {
        if self.hi < 0.0 {
            return Err(IntervalError::Domain);
        }
        Ok(Interval {
            lo: sqrt_down(self.lo.max(0.0)),
            hi: sqrt_up(self.hi),
        })
    }

    pub fn div(&self, rhs: &Interval) -> Result<Interval, IntervalError> {
        if rhs.contains_zero() {
            return Err(IntervalError::PossiblyUnbounded);
        }
        let candidates_lo = [
            div_down(self.lo, rhs.lo),
            div_down(self.lo, rhs.hi),
            div_down(self.hi, rhs.lo),
            div_down(self.hi, rhs.hi),
        ];
        let candidates_hi = [
            div_up(self.lo, rhs.lo),
            div_up(self.lo, rhs.hi),
            div_up(self.hi, rhs.lo),
            div_up(self.hi, rhs.hi),
        ];
        Ok(Interval {
            lo: fmin(&candidates_lo),
            hi: fmax(&candidates_hi),
        })
    }

    pub fn recip(&self) -> Result<Interval, IntervalError> {
        Interval::ONE.div(self)
    }

    /// Integer power. Even powers of intervals straddling zero start at 0.
    /// Negative exponents go through division.
    pub fn powi(&self, n: i32) -> Result<Interval, IntervalError> {
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let n = n as u32;
        if n == 0 {
            return Ok(Interval::ONE);
        }
        if n % 2 == 0 {
            let a = self.abs();
            Ok(Interval {
                lo: pow_down_nonneg(a.lo, n),
                hi: pow_up_nonneg(a.hi, n),
            })
        } else {
            let lo = if self.lo >= 0.0 {
                pow_down_nonneg(self.lo, n)
            } else {
                -pow_up_nonneg(-self.lo, n)
            };
            let hi = if self.hi >= 0.0 {
                pow_up_nonneg(self.hi, n)
            } else {
                -pow_down_nonneg(-self.hi, n)
            };
            Ok(Interval { lo, hi })
        }
    }

    pub fn sqr(&self) -> Interval {
        self.powi(2).expect("nonnegative power")
    }

    pub fn min(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn max(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Splits at the midpoint into two closed halves sharing the midpoint.
    pub fn bisect(&self) -> (Interval, Interval) {
        let m = self.mid();
        (
            Interval { lo: self.lo, hi: m },
            Interval { lo: m, hi: self.hi },
        )
    }
}

fn fmin(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn fmax(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, rhs.lo),
            hi: add_up(self.hi, rhs.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, -rhs.hi),
            hi: add_up(self.hi, -rhs.lo),
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let (a, b, c, d) = (self.lo, self.hi, rhs.lo, rhs.hi);
        Interval {
            lo: fmin(&[mul_down(a, c), mul_down(a, d), mul_down(b, c), mul_down(b, d)]),
            hi: fmax(&[mul_up(a, c), mul_up(a, d), mul_up(b, c), mul_up(b, d)]),
        }
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, rhs: f64) -> Interval {
        self + Interval::point(rhs)
    }
}

impl Sub<f64> for Interval {
    type Output = Interval;
    fn sub(self, rhs: f64) -> Interval {
        self - Interval::point(rhs)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        self * Interval::point(rhs)
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", decimal::format_f64(self.lo), decimal::format_f64(self.hi))
    }
}

// ---- serialization ----------------------------------------------------------
//
// Intervals are written as {"lo": "<decimal>", "hi": "<decimal>"} using the
// shortest round-trip float text, so parse(print(x)) == x. Reading rounds the
// lower string down and the upper string up, so parse(text) always contains
// the exact decimal interval even for hand-written literals.

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: DecimalText,
    hi: DecimalText,
}

/// A decimal given either as a JSON string or a JSON number.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DecimalText {
    Text(String),
    Number(f64),
}

fn parse_endpoint(text: &DecimalText, lower: bool) -> Result<f64, String> {
    match text {
        DecimalText::Number(x) => Ok(*x),
        DecimalText::Text(s) => match s.trim() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            s => {
                let iv = Interval::from_decimal(s).map_err(|e| e.to_string())?;
                Ok(if lower { iv.lo } else { iv.hi })
            }
        },
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        IntervalRepr {
            lo: DecimalText::Text(decimal::format_f64(self.lo)),
            hi: DecimalText::Text(decimal::format_f64(self.hi)),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = IntervalRepr::deserialize(deserializer)?;
        let lo = parse_endpoint(&repr.lo, true).map_err(serde::de::Error::custom)?;
        let hi = parse_endpoint(&repr.hi, false).map_err(serde::de::Error::custom)?;
        Interval::new(lo, hi).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn ulp(x: f64) -> f64 {
        x.abs().next_up() - x.abs()
    }

    #[test]
    fn add_examples() {
        let s = iv(1.0, 2.0) + iv(3.0, 4.0);
        assert!(s.lo() <= 4.0 && 4.0 - s.lo() <= ulp(4.0));
        assert!(s.hi() >= 6.0 && s.hi() - 6.0 <= ulp(6.0));
        assert_eq!(iv(0.0, 0.0) + iv(-1.0, 1.0), iv(-1.0, 1.0));
        assert_eq!(iv(-2.0, -1.0) + iv(1.0, 2.0), iv(-1.0, 1.0));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(iv(1.0, 2.0) * iv(3.0, 4.0), iv(3.0, 8.0));
        assert_eq!(iv(-1.0, 2.0) * iv(-3.0, 4.0), iv(-6.0, 8.0));
        assert_eq!(iv(0.0, 0.0) * iv(-9.0, 9.0), iv(0.0, 0.0));
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(iv(4.0, 9.0).sqrt().unwrap(), iv(2.0, 3.0));
        let r8 = iv(8.0, 8.0).sqrt().unwrap();
        assert!(r8.contains(2.8284271247461903));
        assert!(r8.width() <= 2.0 * ulp(2.83));
        assert!(r8.lo() * r8.lo() <= 8.0 + 1e-15 && r8.hi() > 2.828427124746190);
        assert_eq!(iv(-1.0, 4.0).sqrt().unwrap(), iv(0.0, 2.0));
        assert_eq!(iv(-2.0, -1.0).sqrt(), Err(IntervalError::Domain));
    }

    #[test]
    fn sqrt_brackets_true_root() {
        // 2 is not a perfect square: bounds must straddle √2 in exact arithmetic.
        let r = iv(2.0, 2.0).sqrt().unwrap();
        assert!(r.lo() < r.hi());
        assert!(r.lo().mul_add(r.lo(), -2.0) < 0.0);
        assert!(r.hi().mul_add(r.hi(), -2.0) > 0.0);
    }

    #[test]
    fn div_sub_pow_examples() {
        assert_eq!(iv(1.0, 2.0).div(&iv(2.0, 4.0)).unwrap(), iv(0.25, 1.0));
        assert_eq!(iv(-2.0, 1.0).powi(2).unwrap(), iv(0.0, 4.0));
        assert_eq!(iv(5.0, 6.0) - iv(1.0, 2.0), iv(3.0, 5.0));
        assert_eq!(
            iv(1.0, 2.0).div(&iv(-1.0, 1.0)),
            Err(IntervalError::PossiblyUnbounded)
        );
        assert_eq!(iv(-2.0, 3.0).powi(3).unwrap(), iv(-8.0, 27.0));
        assert_eq!(iv(2.0, 4.0).powi(-1).unwrap(), iv(0.25, 0.5));
        assert_eq!(iv(-1.0, 1.0).powi(-2), Err(IntervalError::PossiblyUnbounded));
        assert_eq!(iv(-3.0, 7.0).powi(0).unwrap(), Interval::ONE);
        assert_eq!(-iv(1.0, 2.0), iv(-2.0, -1.0));
    }

    #[test]
    fn division_brackets_thirds() {
        let third = Interval::ONE.div(&Interval::point(3.0)).unwrap();
        assert!(third.lo() < third.hi());
        assert!(third.lo() * 3.0 <= 1.0 && third.hi() * 3.0 >= 1.0);
    }

    #[test]
    fn min_max_hull() {
        assert_eq!(iv(1.0, 5.0).min(&iv(2.0, 3.0)), iv(1.0, 3.0));
        assert_eq!(iv(1.0, 5.0).max(&iv(2.0, 3.0)), iv(2.0, 5.0));
        assert_eq!(iv(1.0, 2.0).hull(&iv(4.0, 5.0)), iv(1.0, 5.0));
        assert_eq!(iv(1.0, 2.0).intersect(&iv(3.0, 4.0)), Err(IntervalError::Empty));
    }

    #[test]
    fn rejects_invalid_bounds() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        assert!(Interval::new(f64::INFINITY, f64::INFINITY).is_err());
    }

    #[test]
    fn overflow_keeps_containment() {
        let big = Interval::point(f64::MAX);
        let s = big + big;
        assert_eq!(s.lo(), f64::MAX);
        assert_eq!(s.hi(), f64::INFINITY);
    }

    #[test]
    fn decimal_literals_are_bracketed() {
        let x = Interval::from_decimal("0.1").unwrap();
        assert!(x.lo() < x.hi());
        assert!(x.contains(0.1));
        assert_eq!(Interval::from_decimal("2").unwrap(), Interval::point(2.0));
    }

    #[test]
    fn serde_round_trip_contains_original() {
        let x = iv(-1.0 / 3.0, 2.0f64.sqrt());
        let text = serde_json::to_string(&x).unwrap();
        assert!(text.contains("\"lo\"") && text.contains("\"hi\""));
        let back: Interval = serde_json::from_str(&text).unwrap();
        assert!(x.is_subset_of(&back));
        assert_eq!(back, x);
        let hand: Interval = serde_json::from_str(r#"{"lo": "2", "hi": "2.51"}"#).unwrap();
        assert_eq!(hand.lo(), 2.0);
        assert!(hand.hi() >= 2.51);
        let num: Interval = serde_json::from_str(r#"{"lo": 1, "hi": 2.5}"#).unwrap();
        assert_eq!(num, iv(1.0, 2.5));
        assert!(serde_json::from_str::<Interval>(r#"{"lo": "3", "hi": "1"}"#).is_err());
    }

    #[test]
    fn degenerate_width_is_a_few_ulps() {
        let cases = [(0.1, 0.7), (1e10, 3.3), (-7.25, 1e-3), (123.456, -654.321)];
        for (a, b) in cases {
            let (x, y) = (Interval::point(a), Interval::point(b));
            for (r, exact) in [(x + y, a + b), (x - y, a - b), (x * y, a * b)] {
                assert!(r.width() <= 4.0 * ulp(exact), "{r:?}");
            }
            let q = x.div(&y).unwrap();
            assert!(q.width() <= 4.0 * ulp(a / b));
        }
    }
}
