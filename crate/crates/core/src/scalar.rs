//! Numeric scalars shared by the exact and floating-point paths.
//!
//! Every estimator is generic over [`Scalar`], so the same code runs with
//! [`BigRational`] (exact table reproductions, enumerated expectations) and
//! `f64` (Monte Carlo replications at large N).

use std::fmt::Debug;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Send + Sync + 'static {
    fn from_rational(r: &BigRational) -> Self;
    fn to_f64(&self) -> f64;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(v)))
    }
}

impl Scalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

/// `num / den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Parses `"3"`, `"-0.25"`, `"1/3"` or `"1e-2"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: '{s}'"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let negative = mantissa.starts_with('-');
    let body = mantissa.trim_start_matches(['-', '+']);
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let mut value = BigRational::from_integer(BigInt::from_str(&digits).map_err(|_| bad())?);
    let scale = exponent - frac.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num::pow(ten, scale as usize);
    } else {
        value /= num::pow(ten, (-scale) as usize);
    }
    Ok(if negative { -value } else { value })
}

/// Converts a JSON number or string into an exact rational. Numbers go
/// through their shortest decimal rendering, so `0.1` becomes `1/10`.
pub fn rational_from_json(v: &serde_json::Value) -> Result<BigRational> {
    match v {
        serde_json::Value::Number(n) => parse_rational(&n.to_string()),
        serde_json::Value::String(s) => parse_rational(s),
        other => Err(Error::Parse(format!("expected a number, got {other}"))),
    }
}

/// Renders a big integer as a JSON number when it fits in i64, else a string.
pub fn bigint_to_json(v: &BigInt) -> serde_json::Value {
    match v.to_i64() {
        Some(x) => serde_json::Value::from(x),
        None => serde_json::Value::String(v.to_string()),
    }
}

pub fn bigint_from_json(v: &serde_json::Value) -> Result<BigInt> {
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| Error::Parse(format!("expected an integer, got {n}"))),
        serde_json::Value::String(s) => {
            BigInt::from_str(s).map_err(|_| Error::Parse(format!("expected an integer, got '{s}'")))
        }
        other => Err(Error::Parse(format!("expected an integer, got {other}"))),
    }
}

/// Fixed 12-significant-digit decimal rendering used in every report.
pub fn decimal12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}

/// Serialized form of an exact rational: `{"num": .., "den": .., "decimal": ".."}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: serde_json::Value,
    pub den: serde_json::Value,
    pub decimal: String,
}

impl From<&BigRational> for RationalJson {
    fn from(r: &BigRational) -> Self {
        RationalJson {
            num: bigint_to_json(r.numer()),
            den: bigint_to_json(r.denom()),
            decimal: decimal12(Scalar::to_f64(r)),
        }
    }
}

impl RationalJson {
    pub fn to_rational(&self) -> Result<BigRational> {
        let num = bigint_from_json(&self.num)?;
        let den = bigint_from_json(&self.den)?;
        if den.is_zero() {
            return Err(Error::Parse("zero denominator".into()));
        }
        Ok(BigRational::new(num, den))
    }
}

/// An exact rational that serializes as [`RationalJson`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub BigRational);

impl Serialize for Exact {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalJson::from(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = RationalJson::deserialize(d)?;
        j.to_rational().map(Exact).map_err(serde::de::Error::custom)
    }
}

impl From<BigRational> for Exact {
    fn from(r: BigRational) -> Self {
        Exact(r)
    }
}

/// Exact conversion of a finite float (every finite f64 is a dyadic rational).
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_f64(x).ok_or_else(|| Error::Parse(format!("non-finite value {x}")))
}

/// JSON rendering of a rational in parameter files: integers as numbers,
/// everything else as a `"num/den"` string.
pub fn rational_to_json(r: &BigRational) -> serde_json::Value {
    if r.is_integer() {
        bigint_to_json(r.numer())
    } else {
        serde_json::Value::String(r.to_string())
    }
}

pub fn rationals_from_json(v: &serde_json::Value) -> Result<Vec<BigRational>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("expected an array of numbers, got {v}")))?
        .iter()
        .map(rational_from_json)
        .collect()
}

pub fn rationals_to_json(v: &[BigRational]) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(rational_to_json).collect())
}
