//! Scalar abstraction for fees and budgets, plus exact coin parsing.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, Signed, Zero};
use thiserror::Error;

use crate::Coin;

/// Numeric type the storage allocator can run over.
///
/// Rationals give exact budget accounting. Floats are accepted for quick
/// estimates, with the usual caveat that `T_p <= B` may then be off by an ulp.
pub trait Scalar: Num + Clone + PartialOrd + fmt::Debug {
    /// Converts a byte count into the scalar domain.
    fn from_count(n: u64) -> Self;

    /// Total order used for sorting; incomparable values (NaN) compare equal.
    fn order(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("byte count exceeds i64"))
    }
}

impl Scalar for Ratio<i128> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i128::from(n))
    }
}

impl Scalar for BigRational {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(BigInt::from(n))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid coin amount {0:?}")]
pub struct CoinParseError(pub String);

/// Integer coin amount.
pub fn coin(n: i64) -> Coin {
    Ratio::from_integer(BigInt::from(n))
}

pub fn coin_from_u64(n: u64) -> Coin {
    Ratio::from_integer(BigInt::from(n))
}

/// Parses `"12"`, `"-3"`, `"5/2"` or a finite decimal such as `"2.5"`.
pub fn parse_coin(text: &str) -> Result<Coin, CoinParseError> {
    let err = || CoinParseError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| err())?;
        let den: BigInt = den.trim().parse().map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(Ratio::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: BigInt = match whole {
            "" | "-" | "+" => BigInt::zero(),
            w => w.parse().map_err(|_| err())?,
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac: BigInt = BigInt::from_str_radix(frac, 10).map_err(|_| err())?;
        let magnitude = whole.abs() * &scale + frac;
        let numer = if negative { -magnitude } else { magnitude };
        return Ok(Ratio::new(numer, scale));
    }
    let n: BigInt = s.parse().map_err(|_| err())?;
    Ok(Ratio::from_integer(n))
}

/// Canonical text form: reduced `n/d`, or just `n` for integers.
pub fn format_coin(c: &Coin) -> String {
    c.to_string()
}

/// Serde adapter writing coins as their canonical string. Deserialization
/// also accepts JSON integers and decimals.
pub mod coin_serde {
    use super::*;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &Coin, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_coin(c))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Coin, D::Error> {
        d.deserialize_any(CoinVisitor)
    }

    struct CoinVisitor;

    impl Visitor<'_> for CoinVisitor {
        type Value = Coin;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a coin amount as integer, decimal or \"n/d\" string")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Coin, E> {
            parse_coin(v).map_err(E::custom)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Coin, E> {
            Ok(coin(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Coin, E> {
            Ok(coin_from_u64(v))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Coin, E> {
            if !v.is_finite() {
                return Err(E::custom("non-finite coin amount"));
            }
            // Display of f64 is the shortest exact round-trip decimal.
            parse_coin(&format!("{v}")).map_err(E::custom)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_coin("160").unwrap(), coin(160));
        assert_eq!(parse_coin("5/2").unwrap(), parse_coin("2.5").unwrap());
        assert_eq!(parse_coin("-0.25").unwrap(), Ratio::new(BigInt::from(-1), BigInt::from(4)));
        assert_eq!(parse_coin(".5").unwrap(), Ratio::new(BigInt::from(1), BigInt::from(2)));
        assert!(parse_coin("1/0").is_err());
        assert!(parse_coin("abc").is_err());
        assert!(parse_coin("").is_err());
        assert!(parse_coin("1.").is_err());
    }

    #[test]
    fn format_is_reduced() {
        assert_eq!(format_coin(&parse_coin("10/4").unwrap()), "5/2");
        assert_eq!(format_coin(&coin(7)), "7");
    }

    #[test]
    fn serde_accepts_numbers() {
        #[derive(serde::Deserialize)]
        struct W {
            #[serde(with = "coin_serde")]
            c: Coin,
        }
        let w: W = serde_json::from_str(r#"{"c": 2.5}"#).unwrap();
        assert_eq!(w.c, parse_coin("5/2").unwrap());
        let w: W = serde_json::from_str(r#"{"c": 3}"#).unwrap();
        assert_eq!(w.c, coin(3));
        let w: W = serde_json::from_str(r#"{"c": "7/3"}"#).unwrap();
        assert_eq!(format_coin(&w.c), "7/3");
    }
}
