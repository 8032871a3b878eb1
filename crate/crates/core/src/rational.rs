//! Exact rational helpers shared by the prior, environment and value code.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Exact rational number used for all masses and weights.
pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// `2^-exp`.
pub fn pow2_neg(exp: u32) -> Q {
    Q::new(BigInt::one(), BigInt::one() << exp as usize)
}

/// `count / 2^exp` for a dyadic mass accumulated as an integer count.
pub fn dyadic(count: &BigUint, exp: u32) -> Q {
    Q::new(BigInt::from(count.clone()), BigInt::one() << exp as usize)
}

pub fn half() -> Q {
    q(1, 2)
}

/// Lossless `"numerator/denominator"` rendering, always with an explicit denominator.
pub fn to_string(value: &Q) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.125"`.
pub fn parse(text: &str) -> Result<Q> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational: `{text}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac);
        let mut n: BigInt = digits.parse().map_err(|_| bad())?;
        if negative {
            n = -n;
        }
        let d = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Q::new(n, d));
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

/// Nearest double; exact for dyadic values that fit.
pub fn to_f64(value: &Q) -> f64 {
    if value.is_zero() {
        return 0.0;
    }
    if let (Some(n), Some(d)) = (value.numer().to_f64(), value.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Huge numerator or denominator: scale both down by the same power of two.
    let shift = value.numer().bits().max(value.denom().bits()).saturating_sub(1000);
    let n = (value.numer() >> shift as usize).to_f64().unwrap_or(0.0);
    let d = (value.denom() >> shift as usize).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Exact rational value of a finite double.
pub fn from_f64(value: f64) -> Result<Q> {
    Q::from_float(value).ok_or_else(|| Error::Parse(format!("not a finite number: {value}")))
}

pub fn in_unit_interval(value: &Q) -> bool {
    !value.is_negative() && value <= &Q::one()
}

/// Serde adapter storing a rational as its `"p/q"` string.
pub mod serde_q {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_string(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Like [`serde_q`] for optional fields.
pub mod serde_q_opt {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&super::to_string(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|text| super::parse(&text).map_err(serde::de::Error::custom))
            .transpose()
    }
}
