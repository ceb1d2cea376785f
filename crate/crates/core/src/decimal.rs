//! Exact decimal <-> rational conversion.
//!
//! Decimal strings written by humans ("2.51", "-1e-9") are rarely representable
//! as `f64`. Everything that needs a rigorous reading of such a string goes
//! through [`parse_rational`] and then brackets the exact value.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed decimal literal `{0}`")]
pub struct ParseDecimalError(pub String);

/// Parses `[+-]digits[.digits][(e|E)[+-]digits]` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, ParseDecimalError> {
    let err = || ParseDecimalError(text.to_string());
    let s = text.trim();
    let (negative, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        Some(_) => (false, s),
        None => return Err(err()),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = body[pos + 1..].parse().map_err(|_| err())?;
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    if exponent.unsigned_abs() > 4000 {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = digits.parse().map_err(|_| err())?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Exact rational value of a finite float.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Largest float <= q and smallest float >= q.
pub fn bracket_rational(q: &BigRational) -> (f64, f64) {
    let nearest = rational_to_f64_nearest(q);
    if !nearest.is_finite() {
        return if nearest > 0.0 {
            (f64::MAX, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, f64::MIN)
        };
    }
    let mut lo = nearest;
    while lo.is_finite() && rational_from_f64(lo) > *q {
        lo = lo.next_down();
    }
    while lo.next_up().is_finite() && rational_from_f64(lo.next_up()) <= *q {
        lo = lo.next_up();
    }
    if rational_from_f64(lo) == *q {
        (lo, lo)
    } else {
        (lo, lo.next_up())
    }
}

/// A float within one ulp of `q` (the callers bracket it afterwards).
pub fn rational_to_f64_nearest(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(if q.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Shortest decimal text that parses back to exactly `x`.
pub fn format_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if x == 0.0 {
        "0.0".to_string()
    } else {
        format!("{x:?}")
    }
}

pub fn is_integer(q: &BigRational) -> bool {
    q.denom().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_scientific() {
        let q = parse_rational("2.51").unwrap();
        assert_eq!(q, BigRational::new(251.into(), 100.into()));
        let q = parse_rational("-1e-9").unwrap();
        assert_eq!(q, BigRational::new((-1).into(), 1_000_000_000.into()));
        let q = parse_rational("3.").unwrap();
        assert_eq!(q, BigRational::from_integer(3.into()));
        assert!(parse_rational("1.2.3").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("-").is_err());
    }

    #[test]
    fn brackets_contain_exact_value() {
        for text in ["0.1", "2.51", "-1.03", "1e300", "7", "-0.000123456789", "5e-320"] {
            let q = parse_rational(text).unwrap();
            let (lo, hi) = bracket_rational(&q);
            assert!(lo <= hi);
            assert!(rational_from_f64(lo) <= q, "{text}");
            assert!(rational_from_f64(hi) >= q, "{text}");
            assert!(hi == lo || hi == lo.next_up(), "{text}");
        }
        let (lo, hi) = bracket_rational(&parse_rational("0.5").unwrap());
        assert_eq!((lo, hi), (0.5, 0.5));
    }

    #[test]
    fn format_round_trips() {
        for x in [0.1, 2.51, -1.0 / 3.0, 1e-310, 6.02e23] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
