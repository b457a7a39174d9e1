//! Exact rational numbers and their textual form.
//!
//! Every quantity in the crate (weights, disutilities, shares, payments,
//! subsidies) is a [`Rational`]. On the wire a rational is either a
//! `"p/q"` string or a bare JSON integer; output always uses the string form.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// `max(0, v)`.
pub fn positive_part(v: Rational) -> Rational {
    if v.is_negative() {
        Rational::zero()
    } else {
        v
    }
}

/// Parses `"p/q"`, `"p"`, or `"-p/q"`. Whitespace around the parts is allowed.
pub fn parse(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| format!("invalid rational numerator in {text:?}"))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| format!("invalid rational denominator in {text:?}"))?;
    if den.is_zero() {
        return Err(format!("zero denominator in {text:?}"));
    }
    Ok(Rational::new(num, den))
}

/// Converts a JSON scalar (string or integer) to a rational.
pub fn from_json(value: &serde_json::Value) -> Result<Rational, String> {
    match value {
        serde_json::Value::String(s) => parse(s),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(int(i))
            } else if let Some(u) = n.as_u64() {
                Ok(Rational::from_integer(BigInt::from(u)))
            } else {
                Err(format!(
                    "non-integer number {n}; write it as a \"p/q\" string"
                ))
            }
        }
        other => Err(format!("expected rational, found {other}")),
    }
}

pub fn to_text(value: &Rational) -> String {
    value.to_string()
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn sum<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    values.into_iter().fold(Rational::zero(), |acc, v| acc + v)
}

// serde adapters, used via `#[serde(with = "...")]`

pub mod serde_scalar {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_text(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        from_json(&v).map_err(serde::de::Error::custom)
    }
}

pub mod serde_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&to_text(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<serde_json::Value>::deserialize(d)?;
        raw.iter()
            .map(|v| from_json(v).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_matrix {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(rows: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(rows.len()))?;
        for row in rows {
            let row: Vec<String> = row.iter().map(to_text).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        let raw = Vec::<Vec<serde_json::Value>>::deserialize(d)?;
        raw.iter()
            .map(|row| {
                row.iter()
                    .map(|v| from_json(v).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}
