//! Maps of user-defined resource properties.

use std::collections::BTreeMap;
use std::fmt;

use crate::annotations::PropValue;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropState {
    Atom(String),
    Unknown,
}

/// What is known about one key. A key missing from the map is `Absent`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Prop<'a> {
    Absent,
    Atom(&'a str),
    Unknown,
}

impl fmt::Display for Prop<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prop::Absent => f.write_str("unspecified"),
            Prop::Atom(a) => f.write_str(a),
            Prop::Unknown => f.write_str("unknown"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PropertyMap {
    map: BTreeMap<String, PropState>,
}

impl PropertyMap {
    pub fn new() -> Self {
        PropertyMap::default()
    }

    pub fn get(&self, key: &str) -> Prop<'_> {
        match self.map.get(key) {
            None => Prop::Absent,
            Some(PropState::Atom(a)) => Prop::Atom(a),
            Some(PropState::Unknown) => Prop::Unknown,
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Applies a postcondition: atoms are set, `?` makes the key unknown.
    pub fn set(&mut self, key: &str, value: &PropValue) {
        let v = match value {
            PropValue::Atom(a) => PropState::Atom(a.clone()),
            PropValue::Any => PropState::Unknown,
        };
        self.map.insert(key.to_string(), v);
    }

    pub fn set_state(&mut self, key: &str, value: PropState) {
        self.map.insert(key.to_string(), value);
    }

    /// Whether the current state guarantees `key` has `value`.
    pub fn entails(&self, key: &str, value: &PropValue) -> bool {
        match value {
            PropValue::Any => true,
            PropValue::Atom(a) => self.get(key) == Prop::Atom(a),
        }
    }

    pub fn join(&self, other: &Self) -> Self {
        let mut map = BTreeMap::new();
        for key in self.map.keys().chain(other.map.keys()) {
            let v = match (self.map.get(key), other.map.get(key)) {
                (Some(a), Some(b)) if a == b => a.clone(),
                _ => PropState::Unknown,
            };
            map.insert(key.clone(), v);
        }
        PropertyMap { map }
    }

    pub fn leq(&self, other: &Self) -> bool {
        self.map.iter().all(|(k, v)| match other.map.get(k) {
            Some(PropState::Unknown) => true,
            Some(w) => w == v,
            None => false,
        }) && other
            .map
            .iter()
            .all(|(k, w)| self.map.contains_key(k) || *w == PropState::Unknown)
    }
}

impl fmt::Display for PropertyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match v {
                PropState::Atom(a) => write!(f, "{k}={a}")?,
                PropState::Unknown => write!(f, "{k}=?")?,
            }
        }
        f.write_str("}")
    }
}
