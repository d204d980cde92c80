//! The resource typestate lattice.
//!
//! A typestate is the set of lifecycle states a value may be in. Joining is
//! set union, which makes the lattice laws hold by construction; the
//! canonical reading of a set is given by [`Typestate::view`].

use std::collections::BTreeSet;
use std::fmt;

use crate::annotations::Sentinel;

/// Identity of an owned resource: where it was acquired and what it is.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResourceId {
    pub site: u32,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Uninitialized,
    Initialized,
    OwnedValid(ResourceId),
    MovedOut,
    Released,
    Finalized,
    BorrowedShared,
    BorrowedExclusive,
    /// The value is the sentinel of an optional type.
    Sentinel(Sentinel),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Uninitialized => f.write_str("uninitialized"),
            Atom::Initialized => f.write_str("initialized"),
            Atom::OwnedValid(r) => write!(f, "owned({}#{})", r.class, r.site),
            Atom::MovedOut => f.write_str("moved"),
            Atom::Released => f.write_str("released"),
            Atom::Finalized => f.write_str("finalized"),
            Atom::BorrowedShared => f.write_str("shared"),
            Atom::BorrowedExclusive => f.write_str("exclusive"),
            Atom::Sentinel(s) => write!(f, "sentinel({s})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Typestate {
    atoms: BTreeSet<Atom>,
}

/// Canonical reading of a typestate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum View<'a> {
    /// Unanalyzed.
    Bottom,
    Plain(&'a Atom),
    /// Definitely the sentinel.
    Sentinel(Sentinel),
    /// Either the inner state or the sentinel.
    MaybeOptional(&'a Atom, Sentinel),
    /// Several distinct states; the set names all contributors.
    Top(&'a BTreeSet<Atom>),
}

impl Typestate {
    pub fn bottom() -> Self {
        Typestate::default()
    }

    pub fn of(atom: Atom) -> Self {
        Typestate {
            atoms: BTreeSet::from([atom]),
        }
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Self {
        Typestate {
            atoms: atoms.into_iter().collect(),
        }
    }

    pub fn maybe_optional(inner: Atom, s: Sentinel) -> Self {
        Typestate::from_atoms([inner, Atom::Sentinel(s)])
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    pub fn is_bottom(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.atoms.contains(a)
    }

    pub fn join(&self, other: &Self) -> Self {
        Typestate {
            atoms: self.atoms.union(&other.atoms).cloned().collect(),
        }
    }

    /// The lattice has finite height per program, so widening is join.
    pub fn widen(&self, other: &Self) -> Self {
        self.join(other)
    }

    pub fn leq(&self, other: &Self) -> bool {
        self.atoms.is_subset(&other.atoms)
    }

    pub fn view(&self) -> View<'_> {
        let sentinels: Vec<Sentinel> = self.sentinels().collect();
        let plain: Vec<&Atom> = self.atoms.iter().filter(|a| !matches!(a, Atom::Sentinel(_))).collect();
        match (plain.as_slice(), sentinels.as_slice()) {
            ([], []) => View::Bottom,
            ([a], []) => View::Plain(a),
            ([], [s]) => View::Sentinel(*s),
            ([a], [s]) => View::MaybeOptional(a, *s),
            _ => View::Top(&self.atoms),
        }
    }

    pub fn sentinels(&self) -> impl Iterator<Item = Sentinel> + '_ {
        self.atoms.iter().filter_map(|a| match a {
            Atom::Sentinel(s) => Some(*s),
            _ => None,
        })
    }

    pub fn has_sentinel(&self) -> bool {
        self.sentinels().next().is_some()
    }

    /// True when the value may be the sentinel and may also be something
    /// else.
    pub fn is_maybe_optional(&self) -> bool {
        self.has_sentinel() && self.atoms.iter().any(|a| !matches!(a, Atom::Sentinel(_)))
    }

    pub fn is_only_sentinel(&self) -> bool {
        !self.atoms.is_empty() && self.atoms.iter().all(|a| matches!(a, Atom::Sentinel(_)))
    }

    /// The non-sentinel part.
    pub fn without_sentinel(&self) -> Self {
        Typestate {
            atoms: self
                .atoms
                .iter()
                .filter(|a| !matches!(a, Atom::Sentinel(_)))
                .cloned()
                .collect(),
        }
    }

    /// The sentinel part.
    pub fn only_sentinel(&self) -> Self {
        Typestate {
            atoms: self
                .atoms
                .iter()
                .filter(|a| matches!(a, Atom::Sentinel(_)))
                .cloned()
                .collect(),
        }
    }

    pub fn owned(&self) -> impl Iterator<Item = &ResourceId> + '_ {
        self.atoms.iter().filter_map(|a| match a {
            Atom::OwnedValid(r) => Some(r),
            _ => None,
        })
    }

    /// Definitely holds the resource (possibly alongside its sentinel).
    pub fn definitely_owns(&self, r: &ResourceId) -> bool {
        self.atoms.contains(&Atom::OwnedValid(r.clone()))
            && self
                .atoms
                .iter()
                .all(|a| matches!(a, Atom::Sentinel(_)) || *a == Atom::OwnedValid(r.clone()))
    }

    pub fn map(&self, f: impl Fn(&Atom) -> Atom) -> Self {
        Typestate {
            atoms: self.atoms.iter().map(f).collect(),
        }
    }

    pub fn insert(&mut self, a: Atom) {
        self.atoms.insert(a);
    }

    pub fn remove(&mut self, a: &Atom) -> bool {
        self.atoms.remove(a)
    }
}

impl fmt::Display for Typestate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.view() {
            View::Bottom => f.write_str("unanalyzed"),
            View::Plain(a) => write!(f, "{a}"),
            View::Sentinel(s) => write!(f, "sentinel({s})"),
            View::MaybeOptional(a, s) => write!(f, "optional({a}, {s})"),
            View::Top(set) => {
                f.write_str("top{")?;
                for (i, a) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str("}")
            }
        }
    }
}
