//! Trace dictionaries: finite maps from [`Address`] to [`Value`].
//!
//! Traces are immutable once built (construct them through [`TraceBuilder`]
//! or the iterator collectors, both insert-only) and iterate in address
//! order, so every downstream computation — scoring, transforms, Jacobian
//! assembly, serialization — is deterministic. The algebra is small:
//! disjoint [`merge`](Trace::merge), key [`restrict`](Trace::restrict) /
//! [`without`](Trace::without), and [tolerance-based equality]
//! (Trace::equal_within) used by the involution round-trip check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{Map as JsonMap, Value as Json};
use thiserror::Error;

use crate::addr::{Address, AddressError};
use crate::value::{Value, ValueError};

/// Errors raised by trace construction and the trace algebra.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    /// Merge inputs share an address.
    #[error("traces overlap at address {0}")]
    OverlappingKeys(Address),
    /// Insert-only builders refuse second writes.
    #[error("address {0} inserted twice")]
    DuplicateAddress(Address),
    #[error(transparent)]
    Address(#[from] AddressError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("malformed trace JSON: {0}")]
    BadJson(String),
}

/// Insert-only constructor for [`Trace`].
#[derive(Debug, Default, Clone)]
pub struct TraceBuilder {
    entries: BTreeMap<Address, Value>,
}

impl TraceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one entry; a repeated address is an error, never an overwrite.
    pub fn insert(&mut self, addr: Address, value: Value) -> Result<(), TraceError> {
        match self.entries.entry(addr) {
            std::collections::btree_map::Entry::Occupied(e) => {
                Err(TraceError::DuplicateAddress(e.key().clone()))
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(value);
                Ok(())
            }
        }
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.entries.contains_key(addr)
    }

    pub fn build(self) -> Trace {
        Trace {
            entries: self.entries,
        }
    }
}

/// An immutable finite map from addresses to tagged values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    entries: BTreeMap<Address, Value>,
}

impl Trace {
    /// The empty trace.
    pub fn empty() -> Self {
        Trace::default()
    }

    /// Builds a trace from pairs, rejecting duplicate addresses.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (Address, Value)>,
    ) -> Result<Self, TraceError> {
        let mut b = TraceBuilder::new();
        for (a, v) in pairs {
            b.insert(a, v)?;
        }
        Ok(b.build())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, addr: &Address) -> Option<&Value> {
        self.entries.get(addr)
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.entries.contains_key(addr)
    }

    /// Entries in address order.
    pub fn iter(&self) -> impl Iterator<Item = (&Address, &Value)> {
        self.entries.iter()
    }

    /// Addresses in order.
    pub fn keys(&self) -> impl Iterator<Item = &Address> {
        self.entries.keys()
    }

    /// The key set as an owned, ordered set.
    pub fn key_set(&self) -> BTreeSet<Address> {
        self.entries.keys().cloned().collect()
    }

    /// Entries whose address lies at or under `prefix`, in address order.
    pub fn under<'a>(
        &'a self,
        prefix: &'a Address,
    ) -> impl Iterator<Item = (&'a Address, &'a Value)> + 'a {
        self.entries
            .iter()
            .filter(move |(a, _)| a.starts_with(prefix))
    }

    /// Disjoint union; any shared address is an error.
    pub fn merge(&self, other: &Trace) -> Result<Trace, TraceError> {
        if let Some(shared) = other.keys().find(|a| self.contains(a)) {
            return Err(TraceError::OverlappingKeys(shared.clone()));
        }
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|(a, v)| (a.clone(), v.clone())));
        Ok(Trace { entries })
    }

    /// The sub-trace at the given keys (missing keys are simply absent).
    pub fn restrict(&self, keys: &BTreeSet<Address>) -> Trace {
        Trace {
            entries: self
                .entries
                .iter()
                .filter(|(a, _)| keys.contains(*a))
                .map(|(a, v)| (a.clone(), v.clone()))
                .collect(),
        }
    }

    /// The sub-trace excluding the given keys.
    pub fn without(&self, keys: &BTreeSet<Address>) -> Trace {
        Trace {
            entries: self
                .entries
                .iter()
                .filter(|(a, _)| !keys.contains(*a))
                .map(|(a, v)| (a.clone(), v.clone()))
                .collect(),
        }
    }

    /// Equality up to an absolute element-wise tolerance on continuous
    /// payloads: key sets, tags, and shapes must match exactly.
    pub fn equal_within(&self, other: &Trace, tol: f64) -> bool {
        self.len() == other.len()
            && self.iter().all(|(a, v)| {
                other
                    .get(a)
                    .is_some_and(|w| v.approx_eq(w, tol))
            })
    }

    /// Addresses at which two traces differ beyond `tol` (present on either
    /// side), with both values — used for check-failure forensics.
    pub fn diff(&self, other: &Trace, tol: f64) -> Vec<(Address, Option<Value>, Option<Value>)> {
        let mut out = Vec::new();
        for (a, v) in self.iter() {
            match other.get(a) {
                Some(w) if v.approx_eq(w, tol) => {}
                w => out.push((a.clone(), Some(v.clone()), w.cloned())),
            }
        }
        for (a, w) in other.iter() {
            if !self.contains(a) {
                out.push((a.clone(), None, Some(w.clone())));
            }
        }
        out
    }

    /// Canonical JSON form: an object keyed by the `/`-joined address text,
    /// each value in its tagged form. Keys sort deterministically.
    pub fn to_json(&self) -> Json {
        let mut map = JsonMap::new();
        for (a, v) in self.iter() {
            map.insert(a.to_string(), v.to_json());
        }
        Json::Object(map)
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    /// Decodes the canonical JSON form.
    pub fn from_json(j: &Json) -> Result<Self, TraceError> {
        let obj = j
            .as_object()
            .ok_or_else(|| TraceError::BadJson(j.to_string()))?;
        let mut b = TraceBuilder::new();
        for (k, v) in obj {
            b.insert(Address::parse(k)?, Value::from_json(v)?)?;
        }
        Ok(b.build())
    }

    pub fn from_json_str(text: &str) -> Result<Self, TraceError> {
        let j: Json =
            serde_json::from_str(text).map_err(|e| TraceError::BadJson(e.to_string()))?;
        Trace::from_json(&j)
    }
}

/// Display renders the canonical JSON, which is compact and unambiguous.
impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json_string())
    }
}
