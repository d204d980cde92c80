//! The composite abstract state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::interval::MultiInterval;
use super::props::PropertyMap;
use super::refs::{Loc, ReferentSet};
use super::typestate::{Atom, ResourceId, Typestate};

/// The nominal type a value carries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum NominalTag {
    #[default]
    Plain,
    Named(String),
    /// Different nominal types on different paths.
    Mixed,
}

impl NominalTag {
    pub fn of(root: Option<String>) -> Self {
        match root {
            Some(r) => NominalTag::Named(r),
            None => NominalTag::Plain,
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            NominalTag::Named(n) => Some(n),
            _ => None,
        }
    }

    pub fn join(&self, other: &Self) -> Self {
        if self == other {
            self.clone()
        } else {
            NominalTag::Mixed
        }
    }

    pub fn leq(&self, other: &Self) -> bool {
        self == other || *other == NominalTag::Mixed
    }
}

/// Everything known about one location.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaceFacts {
    pub ts: Typestate,
    pub range: MultiInterval,
    pub props: PropertyMap,
    pub refs: ReferentSet,
    pub nominal: NominalTag,
}

impl PlaceFacts {
    pub fn new(ts: Typestate, range: MultiInterval) -> Self {
        PlaceFacts {
            ts,
            range,
            props: PropertyMap::new(),
            refs: ReferentSet::empty(),
            nominal: NominalTag::Plain,
        }
    }

    pub fn join(&self, other: &Self) -> Self {
        PlaceFacts {
            ts: self.ts.join(&other.ts),
            range: self.range.join(&other.range),
            props: self.props.join(&other.props),
            refs: self.refs.join(&other.refs),
            nominal: self.nominal.join(&other.nominal),
        }
    }

    pub fn widen(&self, next: &Self) -> Self {
        PlaceFacts {
            ts: self.ts.widen(&next.ts),
            range: self.range.widen(&next.range),
            props: self.props.join(&next.props),
            refs: self.refs.join(&next.refs),
            nominal: self.nominal.join(&next.nominal),
        }
    }

    pub fn leq(&self, other: &Self) -> bool {
        self.ts.leq(&other.ts)
            && self.range.is_subset(&other.range)
            && self.props.leq(&other.props)
            && self.refs.leq(&other.refs)
            && self.nominal.leq(&other.nominal)
    }
}

impl fmt::Display for PlaceFacts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.ts, self.range)?;
        if let NominalTag::Named(n) = &self.nominal {
            write!(f, " : {n}")?;
        } else if self.nominal == NominalTag::Mixed {
            write!(f, " : <mixed>")?;
        }
        if !self.refs.is_empty() {
            write!(f, " -> {}", self.refs)?;
        }
        if !self.props.is_empty() {
            write!(f, " {}", self.props)?;
        }
        Ok(())
    }
}

/// A call effect that only takes place if the call did not return its
/// sentinel, applied once the result is known to be ordinary.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Effect {
    Initialize(Loc),
}

/// What determines the size of an allocation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeDep {
    /// The variable holding the size passed to the allocator.
    Var(String),
    /// The variable was reassigned; refinements no longer apply.
    Killed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockKind {
    Checked,
    Unchecked,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AbstractState {
    pub places: BTreeMap<Loc, PlaceFacts>,
    /// Enclosing e_checked/e_unchecked statements, innermost last.
    pub blocks: Vec<(BlockKind, String)>,
    /// Deferred effects keyed by the place holding the optional result.
    pub pending: BTreeMap<Loc, BTreeSet<Effect>>,
    /// Allocation site to the variable giving its size.
    pub alloc_size: BTreeMap<u32, SizeDep>,
}

impl AbstractState {
    pub fn get(&self, l: &Loc) -> Option<&PlaceFacts> {
        self.places.get(l)
    }

    pub fn set(&mut self, l: Loc, facts: PlaceFacts) {
        self.places.insert(l, facts);
    }

    /// Weak update: the location keeps its old possibilities as well.
    pub fn set_weak(&mut self, l: Loc, facts: PlaceFacts) {
        let merged = match self.places.get(&l) {
            Some(old) => old.join(&facts),
            None => facts,
        };
        self.places.insert(l, merged);
    }

    pub fn remove(&mut self, l: &Loc) {
        self.places.retain(|k, _| !k.is_within(l));
        self.pending.remove(l);
    }

    /// Facts a member location has implicitly through the nearest enclosing
    /// location this state records, shaped like `like`.
    fn derived(&self, l: &Loc, like: &PlaceFacts) -> Option<PlaceFacts> {
        let mut cur = l;
        while let Loc::Field(base, _) = cur {
            if let Some(f) = self.places.get(base) {
                let ts = f.ts.map(|a| match a {
                    Atom::Uninitialized | Atom::Finalized | Atom::Released => a.clone(),
                    _ => Atom::Initialized,
                });
                let mut d = PlaceFacts::new(ts, MultiInterval::top());
                d.nominal = like.nominal.clone();
                if !like.refs.is_empty() {
                    d.refs = ReferentSet::of(Loc::Unknown);
                }
                return Some(d);
            }
            cur = base;
        }
        None
    }

    fn combine(&self, other: &Self, f: impl Fn(&PlaceFacts, &PlaceFacts) -> PlaceFacts) -> Self {
        let mut places = BTreeMap::new();
        for l in self.places.keys().chain(other.places.keys()) {
            let v = match (self.places.get(l), other.places.get(l)) {
                (Some(a), Some(b)) => f(a, b),
                (Some(a), None) => match other.derived(l, a) {
                    Some(d) => f(a, &d),
                    None => a.clone(),
                },
                (None, Some(b)) => match self.derived(l, b) {
                    Some(d) => f(&d, b),
                    None => b.clone(),
                },
                (None, None) => continue,
            };
            places.insert(l.clone(), v);
        }
        let mut pending = self.pending.clone();
        for (l, effects) in &other.pending {
            pending.entry(l.clone()).or_default().extend(effects.iter().cloned());
        }
        let mut alloc_size = self.alloc_size.clone();
        for (site, dep) in &other.alloc_size {
            match alloc_size.get(site) {
                Some(mine) if mine != dep => {
                    alloc_size.insert(*site, SizeDep::Killed);
                }
                Some(_) => {}
                None => {
                    alloc_size.insert(*site, dep.clone());
                }
            }
        }
        AbstractState {
            places,
            blocks: self.blocks.clone(),
            pending,
            alloc_size,
        }
    }

    /// Pointwise join. A member missing on one side is derived from its
    /// enclosing location there; other missing places take the other side.
    pub fn join(&self, other: &Self) -> Self {
        self.combine(other, PlaceFacts::join)
    }

    pub fn widen(&self, next: &Self) -> Self {
        self.combine(next, PlaceFacts::widen)
    }

    pub fn leq(&self, other: &Self) -> bool {
        self.places.iter().all(|(l, f)| match other.places.get(l) {
            Some(g) => f.leq(g),
            None => false,
        }) && self
            .pending
            .iter()
            .all(|(l, e)| other.pending.get(l).is_some_and(|o| e.is_subset(o)))
            && self
                .alloc_size
                .iter()
                .all(|(s, d)| matches!(other.alloc_size.get(s), Some(o) if o == d || *o == SizeDep::Killed))
    }

    /// Locations holding each resource, possibly or definitely.
    pub fn holders(&self) -> BTreeMap<ResourceId, Vec<&Loc>> {
        let mut out: BTreeMap<ResourceId, Vec<&Loc>> = BTreeMap::new();
        for (l, f) in &self.places {
            for r in f.ts.owned() {
                out.entry(r.clone()).or_default().push(l);
            }
        }
        out
    }

    /// At most one location definitely owns each resource.
    pub fn check_single_owner(&self) -> Result<(), (ResourceId, Vec<Loc>)> {
        for (r, locs) in self.holders() {
            let definite: Vec<Loc> = locs
                .into_iter()
                .filter(|l| self.places[*l].ts.definitely_owns(&r))
                .cloned()
                .collect();
            if definite.len() > 1 {
                return Err((r, definite));
            }
        }
        Ok(())
    }

    pub fn in_block(&self, kind: &str) -> Option<BlockKind> {
        self.blocks.iter().rev().find(|(_, k)| k == kind).map(|(b, _)| *b)
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, facts) in &self.places {
            writeln!(f, "    {l}: {facts}")?;
        }
        for (l, effects) in &self.pending {
            for e in effects {
                match e {
                    Effect::Initialize(t) => writeln!(f, "    pending on {l}: initialize {t}")?,
                }
            }
        }
        for (site, dep) in &self.alloc_size {
            match dep {
                SizeDep::Var(v) => writeln!(f, "    size of heap#{site}: {v}")?,
                SizeDep::Killed => writeln!(f, "    size of heap#{site}: unknown")?,
            }
        }
        for (b, k) in &self.blocks {
            writeln!(f, "    inside {b:?}(\"{k}\")")?;
        }
        Ok(())
    }
}
