//! Abstract memory locations and points-to sets.

use std::collections::BTreeSet;
use std::fmt;

/// An abstract memory location.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Loc {
    /// A local variable or parameter.
    Var(String),
    /// A file-scope object.
    Global(String),
    /// A struct member of another location.
    Field(Box<Loc>, String),
    /// Summary of the objects allocated at one call site.
    Heap(u32),
    /// The caller-provided object a pointer parameter refers to on entry.
    Target(String),
    /// A string literal.
    Str,
    Null,
    /// Anything not otherwise described.
    Unknown,
}

impl Loc {
    pub fn var(name: &str) -> Loc {
        Loc::Var(name.to_string())
    }

    pub fn field(self, name: &str) -> Loc {
        Loc::Field(Box::new(self), name.to_string())
    }

    /// The outermost location this one is a part of.
    pub fn root(&self) -> &Loc {
        match self {
            Loc::Field(base, _) => base.root(),
            other => other,
        }
    }

    pub fn is_within(&self, other: &Loc) -> bool {
        self == other || matches!(self, Loc::Field(base, _) if base.is_within(other))
    }

    /// Locations that stand for more than one concrete object, which only
    /// admit weak updates.
    pub fn is_summary(&self) -> bool {
        matches!(self.root(), Loc::Heap(_) | Loc::Unknown | Loc::Str)
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Var(v) | Loc::Global(v) => f.write_str(v),
            Loc::Field(base, m) => write!(f, "{base}.{m}"),
            Loc::Heap(site) => write!(f, "heap#{site}"),
            Loc::Target(p) => write!(f, "*{p}"),
            Loc::Str => f.write_str("<string>"),
            Loc::Null => f.write_str("NULL"),
            Loc::Unknown => f.write_str("<unknown>"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ReferentSet {
    locs: BTreeSet<Loc>,
}

impl ReferentSet {
    pub fn empty() -> Self {
        ReferentSet::default()
    }

    pub fn of(loc: Loc) -> Self {
        ReferentSet {
            locs: BTreeSet::from([loc]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Loc> {
        self.locs.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    pub fn contains(&self, l: &Loc) -> bool {
        self.locs.contains(l)
    }

    pub fn insert(&mut self, l: Loc) {
        self.locs.insert(l);
    }

    /// Referents other than NULL.
    pub fn non_null(&self) -> ReferentSet {
        ReferentSet {
            locs: self.locs.iter().filter(|l| **l != Loc::Null).cloned().collect(),
        }
    }

    pub fn only_null(&self) -> ReferentSet {
        ReferentSet {
            locs: self.locs.iter().filter(|l| **l == Loc::Null).cloned().collect(),
        }
    }

    pub fn join(&self, other: &Self) -> Self {
        ReferentSet {
            locs: self.locs.union(&other.locs).cloned().collect(),
        }
    }

    pub fn leq(&self, other: &Self) -> bool {
        self.locs.is_subset(&other.locs)
    }

    /// Locations of a member in every referent.
    pub fn field(&self, name: &str) -> ReferentSet {
        ReferentSet {
            locs: self
                .locs
                .iter()
                .filter(|l| **l != Loc::Null)
                .map(|l| match l {
                    Loc::Unknown => Loc::Unknown,
                    l => l.clone().field(name),
                })
                .collect(),
        }
    }
}

impl fmt::Display for ReferentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, l) in self.locs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("}")
    }
}
