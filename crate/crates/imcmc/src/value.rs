//! Values stored at trace addresses.
//!
//! Every value is tagged either *discrete* (integer, boolean, or string —
//! compared exactly) or *continuous* (a non-empty vector of finite reals —
//! compared within a tolerance). Scalars are length-1 vectors; the tag and
//! shape are part of equality. NaN and infinities are rejected at
//! construction so they can never leak into densities or serialized output.

use std::fmt;

use serde_json::{json, Value as Json};
use thiserror::Error;

/// Errors raised by value construction and JSON decoding.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("continuous payload entry {0} is not finite")]
    NonFinite(f64),
    #[error("continuous payload must be non-empty")]
    EmptyVector,
    #[error("malformed value JSON: {0}")]
    BadJson(String),
}

/// Discrete payloads, compared exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Discrete {
    Int(i64),
    Bool(bool),
    Str(String),
}

impl fmt::Display for Discrete {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discrete::Int(i) => write!(f, "{i}"),
            Discrete::Bool(b) => write!(f, "{b}"),
            Discrete::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for Discrete {
    fn from(i: i64) -> Self {
        Discrete::Int(i)
    }
}

impl From<bool> for Discrete {
    fn from(b: bool) -> Self {
        Discrete::Bool(b)
    }
}

impl From<&str> for Discrete {
    fn from(s: &str) -> Self {
        Discrete::Str(s.to_owned())
    }
}

/// The tag of a value, part of its identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Discrete,
    Continuous,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Discrete => write!(f, "discrete"),
            Tag::Continuous => write!(f, "continuous"),
        }
    }
}

/// A tagged trace value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Discrete(Discrete),
    Continuous(Vec<f64>),
}

impl Value {
    pub fn int(i: i64) -> Self {
        Value::Discrete(Discrete::Int(i))
    }

    pub fn bool(b: bool) -> Self {
        Value::Discrete(Discrete::Bool(b))
    }

    pub fn str(s: impl Into<String>) -> Self {
        Value::Discrete(Discrete::Str(s.into()))
    }

    /// A continuous scalar (a length-1 vector).
    pub fn scalar(x: f64) -> Result<Self, ValueError> {
        Value::continuous(vec![x])
    }

    /// A continuous vector; every entry must be finite and the vector
    /// non-empty.
    pub fn continuous(xs: Vec<f64>) -> Result<Self, ValueError> {
        if xs.is_empty() {
            return Err(ValueError::EmptyVector);
        }
        if let Some(&bad) = xs.iter().find(|x| !x.is_finite()) {
            return Err(ValueError::NonFinite(bad));
        }
        Ok(Value::Continuous(xs))
    }

    pub fn tag(&self) -> Tag {
        match self {
            Value::Discrete(_) => Tag::Discrete,
            Value::Continuous(_) => Tag::Continuous,
        }
    }

    pub fn as_discrete(&self) -> Option<&Discrete> {
        match self {
            Value::Discrete(d) => Some(d),
            Value::Continuous(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Discrete(Discrete::Int(i)) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Discrete(Discrete::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    /// The scalar payload of a length-1 continuous value.
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Continuous(xs) if xs.len() == 1 => Some(xs[0]),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Value::Continuous(xs) => Some(xs),
            Value::Discrete(_) => None,
        }
    }

    /// Tolerance-based equality: tags and shapes must match exactly,
    /// discrete payloads compare exactly, continuous entries compare within
    /// an absolute tolerance element-wise.
    pub fn approx_eq(&self, other: &Value, tol: f64) -> bool {
        match (self, other) {
            (Value::Discrete(a), Value::Discrete(b)) => a == b,
            (Value::Continuous(a), Value::Continuous(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
            }
            _ => false,
        }
    }

    /// Canonical JSON form: `{"tag":"d","v":…}` for discrete values (string
    /// payloads as JSON strings, integers as numbers, booleans as booleans)
    /// and `{"tag":"c","v":[…]}` for continuous vectors. Continuous entries
    /// rely on shortest-round-trip float printing, so decoding recovers the
    /// exact bits.
    pub fn to_json(&self) -> Json {
        match self {
            Value::Discrete(Discrete::Int(i)) => json!({"tag": "d", "v": i}),
            Value::Discrete(Discrete::Bool(b)) => json!({"tag": "d", "v": b}),
            Value::Discrete(Discrete::Str(s)) => json!({"tag": "d", "v": s}),
            Value::Continuous(xs) => json!({"tag": "c", "v": xs}),
        }
    }

    /// Decodes the canonical JSON form.
    pub fn from_json(j: &Json) -> Result<Self, ValueError> {
        let bad = || ValueError::BadJson(j.to_string());
        let obj = j.as_object().ok_or_else(bad)?;
        let tag = obj.get("tag").and_then(Json::as_str).ok_or_else(bad)?;
        let v = obj.get("v").ok_or_else(bad)?;
        match tag {
            "d" => match v {
                Json::Bool(b) => Ok(Value::bool(*b)),
                Json::String(s) => Ok(Value::str(s.clone())),
                Json::Number(n) => n.as_i64().map(Value::int).ok_or_else(bad),
                _ => Err(bad()),
            },
            "c" => {
                let arr = v.as_array().ok_or_else(bad)?;
                let xs = arr
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(bad))
                    .collect::<Result<Vec<_>, _>>()?;
                Value::continuous(xs)
            }
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn construction_rejects_non_finite_and_empty() {
        assert!(matches!(
            Value::scalar(f64::NAN),
            Err(ValueError::NonFinite(_))
        ));
        assert!(matches!(
            Value::continuous(vec![1.0, f64::INFINITY]),
            Err(ValueError::NonFinite(_))
        ));
        assert_eq!(Value::continuous(vec![]), Err(ValueError::EmptyVector));
    }

    #[test]
    fn tags_and_shapes_are_part_of_equality() {
        let tol = 1e-9;
        assert!(!Value::int(1).approx_eq(&Value::scalar(1.0).unwrap(), tol));
        assert!(!Value::int(1).approx_eq(&Value::bool(true), tol));
        assert!(!Value::scalar(1.0)
            .unwrap()
            .approx_eq(&Value::continuous(vec![1.0, 1.0]).unwrap(), tol));
        assert!(Value::scalar(1.0)
            .unwrap()
            .approx_eq(&Value::scalar(1.0 + 5e-10).unwrap(), tol));
        assert!(!Value::scalar(1.0)
            .unwrap()
            .approx_eq(&Value::scalar(1.0 + 2e-9).unwrap(), tol));
    }

    #[test]
    fn json_forms_by_tag() {
        assert_eq!(Value::int(5).to_json().to_string(), r#"{"tag":"d","v":5}"#);
        assert_eq!(
            Value::bool(true).to_json().to_string(),
            r#"{"tag":"d","v":true}"#
        );
        assert_eq!(
            Value::str("se").to_json().to_string(),
            r#"{"tag":"d","v":"se"}"#
        );
        assert_eq!(
            Value::continuous(vec![0.5, -1.0]).unwrap().to_json().to_string(),
            r#"{"tag":"c","v":[0.5,-1.0]}"#
        );
    }

    #[test]
    fn json_rejects_malformed() {
        for bad in [
            r#"{"tag":"x","v":1}"#,
            r#"{"tag":"d"}"#,
            r#"{"tag":"d","v":1.5}"#,
            r#"{"tag":"c","v":[true]}"#,
            r#"[1,2]"#,
        ] {
            let j: Json = serde_json::from_str(bad).unwrap();
            assert!(Value::from_json(&j).is_err(), "accepted {bad}");
        }
    }

    pub(crate) fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::int),
            any::<bool>().prop_map(Value::bool),
            "[a-zA-Z0-9 _.-]{0,12}".prop_map(Value::str),
            proptest::collection::vec(-1e12f64..1e12, 1..5)
                .prop_map(|xs| Value::continuous(xs).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(v in arb_value()) {
            let text = v.to_json().to_string();
            let back = Value::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
            // Exact equality, not approx: continuous payloads must survive
            // the decimal round trip bit for bit.
            prop_assert_eq!(back, v);
        }
    }
}
