//! JSON helpers for complex numbers.
//!
//! A complex value is written as `[re, im]`. On input a bare number, a
//! two-element array or an object `{"re": .., "im": ..}` are all accepted.

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::Deserialize;

use crate::C64;

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyComplex {
    Real(f64),
    Pair([f64; 2]),
    Object { re: f64, #[serde(default)] im: f64 },
}

impl From<AnyComplex> for C64 {
    fn from(v: AnyComplex) -> C64 {
        match v {
            AnyComplex::Real(r) => C64::new(r, 0.0),
            AnyComplex::Pair([re, im]) => C64::new(re, im),
            AnyComplex::Object { re, im } => C64::new(re, im),
        }
    }
}

pub fn to_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub mod complex {
    use super::*;
    use serde::Serialize;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        to_pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        AnyComplex::deserialize(d).map(C64::from)
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for z in v {
            seq.serialize_element(&to_pair(*z))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw: Vec<AnyComplex> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(C64::from).collect())
    }
}

pub mod complex_vec_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<C64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for row in v {
            let pairs: Vec<[f64; 2]> = row.iter().map(|z| to_pair(*z)).collect();
            seq.serialize_element(&pairs)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<C64>>, D::Error> {
        let raw: Vec<Vec<AnyComplex>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|r| r.into_iter().map(C64::from).collect())
            .collect())
    }
}

pub mod complex_opt {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(z) => s.serialize_some(&to_pair(*z)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<C64>, D::Error> {
        let raw: Option<AnyComplex> = Option::deserialize(d)?;
        Ok(raw.map(C64::from))
    }
}

/// Parse a complex value out of an arbitrary JSON value.
pub fn complex_from_value(v: &serde_json::Value) -> Result<C64, serde_json::Error> {
    AnyComplex::deserialize(v).map(C64::from).map_err(de::Error::custom)
}
