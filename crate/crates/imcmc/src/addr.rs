//! Structured addresses identifying random choices in a trace.
//!
//! An [`Address`] is a non-empty path of [`Component`]s. Components are
//! deliberately restricted to three shapes — bare keys, integers, and
//! `key(integer)` pairs — so that addresses are totally ordered, hashable,
//! and round-trip losslessly through their `/`-joined text form (used as
//! JSON object keys). Anything fancier is rejected at construction.

use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by address construction and parsing.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    /// A key failed the lexical rules (identifier-like, so the text form is
    /// unambiguous: keys can never be confused with integers or pairs).
    #[error("invalid address key {0:?}: keys must match [A-Za-z_][A-Za-z0-9_.-]*")]
    InvalidKey(String),
    /// Text that does not parse as a component.
    #[error("unparseable address component {0:?}")]
    Unparseable(String),
    /// Addresses must have at least one component.
    #[error("empty address")]
    Empty,
}

/// One path element of an [`Address`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    /// A bare name such as `k` or `noise`.
    Key(String),
    /// A bare integer, used for list-like positions.
    Index(i64),
    /// A named slot such as `mu(4)` — a key paired with an integer.
    Sub(String, i64),
}

fn valid_key(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

impl Component {
    /// A key component, validated against the lexical rules.
    pub fn key(s: impl Into<String>) -> Result<Self, AddressError> {
        let s = s.into();
        if valid_key(&s) {
            Ok(Component::Key(s))
        } else {
            Err(AddressError::InvalidKey(s))
        }
    }

    /// An integer component.
    pub fn index(i: i64) -> Self {
        Component::Index(i)
    }

    /// A `key(integer)` component.
    pub fn sub(s: impl Into<String>, i: i64) -> Result<Self, AddressError> {
        let s = s.into();
        if valid_key(&s) {
            Ok(Component::Sub(s, i))
        } else {
            Err(AddressError::InvalidKey(s))
        }
    }

    /// Parses the text form produced by [`fmt::Display`].
    pub fn parse(text: &str) -> Result<Self, AddressError> {
        if let Ok(i) = text.parse::<i64>() {
            return Ok(Component::Index(i));
        }
        if let Some(open) = text.find('(') {
            let (name, rest) = text.split_at(open);
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| AddressError::Unparseable(text.to_owned()))?;
            let i = inner
                .parse::<i64>()
                .map_err(|_| AddressError::Unparseable(text.to_owned()))?;
            return Component::sub(name, i);
        }
        Component::key(text)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Key(s) => write!(f, "{s}"),
            Component::Index(i) => write!(f, "{i}"),
            Component::Sub(s, i) => write!(f, "{s}({i})"),
        }
    }
}

/// Infallible conversions for literal-heavy model code. These panic on
/// malformed keys, which is the right trade-off for addresses spelled out in
/// source; data paths should use [`Component::parse`].
impl From<&str> for Component {
    fn from(s: &str) -> Self {
        Component::key(s).expect("address key literal")
    }
}

impl From<i64> for Component {
    fn from(i: i64) -> Self {
        Component::Index(i)
    }
}

impl From<(&str, i64)> for Component {
    fn from((s, i): (&str, i64)) -> Self {
        Component::sub(s, i).expect("address key literal")
    }
}

/// A non-empty path of components naming one random choice.
///
/// Ordering is lexicographic over components (with the derived component
/// order), which fixes the deterministic iteration order of traces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(Vec<Component>);

impl Address {
    /// Builds an address from components; errors on an empty path.
    pub fn new(components: Vec<Component>) -> Result<Self, AddressError> {
        if components.is_empty() {
            Err(AddressError::Empty)
        } else {
            Ok(Address(components))
        }
    }

    /// The components of the path.
    pub fn components(&self) -> &[Component] {
        &self.0
    }

    /// Parses a `/`-joined text form, the inverse of [`fmt::Display`].
    pub fn parse(text: &str) -> Result<Self, AddressError> {
        let comps = text
            .split('/')
            .map(Component::parse)
            .collect::<Result<Vec<_>, _>>()?;
        Address::new(comps)
    }

    /// This address nested under `prefix` (i.e. `prefix / self`).
    pub fn under(&self, prefix: &Address) -> Address {
        let mut comps = prefix.0.clone();
        comps.extend(self.0.iter().cloned());
        Address(comps)
    }

    /// This address extended by one trailing component.
    pub fn child(&self, c: impl Into<Component>) -> Address {
        let mut comps = self.0.clone();
        comps.push(c.into());
        Address(comps)
    }

    /// Whether `self` is `prefix` or lies underneath it.
    pub fn starts_with(&self, prefix: &Address) -> bool {
        self.0.len() >= prefix.0.len() && self.0[..prefix.0.len()] == prefix.0[..]
    }

    /// Strips a leading `prefix`, returning the remainder (`None` when the
    /// address *is* the prefix or does not start with it).
    pub fn strip_prefix(&self, prefix: &Address) -> Option<Address> {
        if self.starts_with(prefix) && self.0.len() > prefix.0.len() {
            Some(Address(self.0[prefix.0.len()..].to_vec()))
        } else {
            None
        }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "/")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl<C: Into<Component>> From<C> for Address {
    fn from(c: C) -> Self {
        Address(vec![c.into()])
    }
}

impl Borrow<[Component]> for Address {
    fn borrow(&self) -> &[Component] {
        &self.0
    }
}

impl Serialize for Address {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Address::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Convenience for building multi-component addresses:
/// `addr!["tree", "left", ("mu", 4)]`.
#[macro_export]
macro_rules! addr {
    [$($c:expr),+ $(,)?] => {
        $crate::addr::Address::new(vec![$($crate::addr::Component::from($c)),+]).unwrap()
    };
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_round_trip_for_each_shape() {
        for text in ["k", "mu(4)", "7", "tree/left/kind", "x/-3/a_b-c.d", "w(-12)"] {
            let a = Address::parse(text).unwrap();
            assert_eq!(a.to_string(), text);
            assert_eq!(Address::parse(&a.to_string()).unwrap(), a);
        }
    }

    #[test]
    fn malformed_components_rejected() {
        assert!(Component::key("").is_err());
        assert!(Component::key("3x").is_err());
        assert!(Component::key("a/b").is_err());
        assert!(Component::key("a(1)").is_err());
        assert!(Component::parse("mu(x)").is_err());
        assert!(Component::parse("mu(1").is_err());
        assert!(Address::parse("").is_err());
    }

    #[test]
    fn ordering_is_lexicographic_and_total() {
        let mut addrs = [
            addr!["mu", 2],
            addr!["k"],
            addr![("mu", 1)],
            addr!["mu", 1],
            addr![("mu", 10)],
        ];
        addrs.sort();
        let rendered: Vec<String> = addrs.iter().map(|a| a.to_string()).collect();
        assert_eq!(rendered, vec!["k", "mu/1", "mu/2", "mu(1)", "mu(10)"]);
    }

    #[test]
    fn prefix_relations() {
        let root = addr!["tree"];
        let leaf = addr!["tree", "left", "kind"];
        assert!(leaf.starts_with(&root));
        assert!(!root.starts_with(&leaf));
        assert_eq!(leaf.strip_prefix(&root).unwrap(), addr!["left", "kind"]);
        assert_eq!(leaf.strip_prefix(&leaf), None);
        assert_eq!(addr!["left", "kind"].under(&root), leaf);
    }

    prop_compose! {
        fn arb_component()(choice in 0..3u8, key in "[a-z_][a-z0-9_]{0,6}", i in -50i64..50) -> Component {
            match choice {
                0 => Component::key(key).unwrap(),
                1 => Component::Index(i),
                _ => Component::sub(key, i).unwrap(),
            }
        }
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(comps in proptest::collection::vec(arb_component(), 1..5)) {
            let a = Address::new(comps).unwrap();
            prop_assert_eq!(Address::parse(&a.to_string()).unwrap(), a);
        }

        #[test]
        fn distinct_addresses_have_distinct_text(
            x in proptest::collection::vec(arb_component(), 1..4),
            y in proptest::collection::vec(arb_component(), 1..4),
        ) {
            let (a, b) = (Address::new(x).unwrap(), Address::new(y).unwrap());
            prop_assert_eq!(a == b, a.to_string() == b.to_string());
        }
    }
}
