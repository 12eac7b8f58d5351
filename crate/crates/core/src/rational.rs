//! Exact rational numbers and their textual forms.
//!
//! All solver arithmetic is carried out on [`Rational`] (arbitrary precision
//! numerator and denominator). Values cross the I/O boundary as strings,
//! either `"p/q"`, a plain integer, or a finite decimal such as `"-1.25"`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct ParseRationalError {
    pub literal: String,
    pub reason: &'static str,
}

pub fn int<T: Into<BigInt>>(value: T) -> Rational {
    Rational::from_integer(value.into())
}

pub fn ratio<N: Into<BigInt>, D: Into<BigInt>>(numer: N, denom: D) -> Rational {
    Rational::new(numer.into(), denom.into())
}

/// Parses `"p/q"`, `"n"` or a finite decimal `"a.b"` (optional sign).
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = |reason| ParseRationalError {
        literal: text.to_string(),
        reason,
    };
    let s = text.trim();
    if s.is_empty() {
        return Err(err("empty"));
    }
    if let Some((p, q)) = s.split_once('/') {
        let numer = parse_integer(p.trim()).ok_or_else(|| err("bad numerator"))?;
        let denom = parse_integer(q.trim()).ok_or_else(|| err("bad denominator"))?;
        if denom.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(numer, denom));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let (negative, whole) = match whole.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, whole.strip_prefix('+').unwrap_or(whole)),
        };
        if (whole.is_empty() && frac.is_empty())
            || !whole.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err("bad decimal"));
        }
        let digits = format!("{whole}{frac}");
        let numer = BigInt::from_str(&digits).map_err(|_| err("bad decimal"))?;
        let denom = num_traits::pow(BigInt::from(10u32), frac.len());
        let value = Rational::new(numer, denom);
        return Ok(if negative { -value } else { value });
    }
    parse_integer(s)
        .map(Rational::from_integer)
        .ok_or_else(|| err("bad integer"))
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s.strip_prefix('+').unwrap_or(s)).ok()
}

/// Canonical text: `"n"` for integers, `"p/q"` otherwise.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Exact decimal text if the expansion terminates (denominator of the form 2^a 5^b).
pub fn to_decimal(value: &Rational) -> Option<String> {
    if value.is_integer() {
        return Some(value.numer().to_string());
    }
    let mut denom = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let (mut twos, mut fives) = (0usize, 0usize);
    while denom.is_even() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scale = num_traits::pow(BigInt::from(10u32), places);
    let scaled = (value * Rational::from_integer(scale.clone())).to_integer();
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (whole, frac) = digits.split_at(digits.len() - places);
    Some(format!("{}{whole}.{frac}", if negative { "-" } else { "" }))
}

/// Least common multiple of the denominators of `values` (1 when empty).
pub fn denominator_lcm<'a, I>(values: I) -> BigInt
where
    I: IntoIterator<Item = &'a Rational>,
{
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

pub fn to_u64(value: &Rational) -> Option<u64> {
    if value.is_integer() {
        value.numer().to_u64()
    } else {
        None
    }
}

/// Newtype giving [`Rational`] its string serde form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalText(pub Rational);

impl fmt::Debug for RationalText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl fmt::Display for RationalText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl serde::Serialize for RationalText {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> serde::Deserialize<'de> for RationalText {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = RationalText;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational string such as \"3\", \"-1/2\" or \"0.25\", or an integer")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Self::Value, E> {
                parse_rational(v).map(RationalText).map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(RationalText(int(v)))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(RationalText(int(v)))
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

/// `#[serde(with = "serde_rational")]` adapter for plain [`Rational`] fields.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: serde::Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        <RationalText as serde::Deserialize>::deserialize(d).map(|t| t.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_literal_forms() {
        assert_eq!(parse_rational("3").unwrap(), int(3));
        assert_eq!(parse_rational("-7/14").unwrap(), ratio(-1, 2));
        assert_eq!(parse_rational("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse_rational("+2").unwrap(), int(2));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1/0", "a", "1/", "1.2.3", "--1", "1e5", "."] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn canonical_format() {
        assert_eq!(format_rational(&ratio(6, 4)), "3/2");
        assert_eq!(format_rational(&int(-4)), "-4");
    }

    #[test]
    fn terminating_decimals_only() {
        assert_eq!(to_decimal(&ratio(1, 8)).as_deref(), Some("0.125"));
        assert_eq!(to_decimal(&ratio(-3, 20)).as_deref(), Some("-0.15"));
        assert_eq!(to_decimal(&int(12)).as_deref(), Some("12"));
        assert_eq!(to_decimal(&ratio(1, 3)), None);
        assert_eq!(
            parse_rational(&to_decimal(&ratio(-7, 40)).unwrap()).unwrap(),
            ratio(-7, 40)
        );
    }

    #[test]
    fn lcm_of_denominators() {
        let vals = [ratio(1, 4), ratio(5, 6), int(2)];
        assert_eq!(denominator_lcm(vals.iter()), BigInt::from(12));
    }

    proptest::proptest! {
        #[test]
        fn text_round_trip(n in -10_000i64..10_000, d in 1i64..500) {
            let v = ratio(n, d);
            let back = parse_rational(&format_rational(&v)).unwrap();
            proptest::prop_assert_eq!(back, v);
        }
    }
}
