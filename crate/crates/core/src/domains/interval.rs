//! Multi-intervals: normalized unions of disjoint closed integer intervals.

use std::fmt;

use crate::annotations::ValuePredicate;
use crate::frontend::ast::BinaryOp;

/// Lower bound standing for -inf.
pub const NEG_INF: i64 = i64::MIN;
/// Upper bound standing for +inf.
pub const POS_INF: i64 = i64::MAX;

/// A sorted list of non-overlapping, non-adjacent intervals. The empty list
/// is bottom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiInterval {
    ivs: Vec<(i64, i64)>,
}

fn wide(v: i64) -> i128 {
    const BIG: i128 = 1 << 100;
    match v {
        NEG_INF => -BIG,
        POS_INF => BIG,
        v => v as i128,
    }
}

fn narrow(v: i128) -> i64 {
    if v >= POS_INF as i128 {
        POS_INF
    } else if v <= NEG_INF as i128 {
        NEG_INF
    } else {
        v as i64
    }
}

fn fmt_bound(v: i64) -> String {
    match v {
        NEG_INF => "-inf".to_string(),
        POS_INF => "+inf".to_string(),
        v => v.to_string(),
    }
}

impl MultiInterval {
    pub fn bottom() -> Self {
        MultiInterval { ivs: Vec::new() }
    }

    pub fn top() -> Self {
        MultiInterval {
            ivs: vec![(NEG_INF, POS_INF)],
        }
    }

    pub fn singleton(v: i64) -> Self {
        MultiInterval { ivs: vec![(v, v)] }
    }

    /// `[lo, hi]`, or bottom when `lo > hi`.
    pub fn range(lo: i64, hi: i64) -> Self {
        if lo > hi {
            Self::bottom()
        } else {
            MultiInterval { ivs: vec![(lo, hi)] }
        }
    }

    pub fn from_intervals(ivs: impl IntoIterator<Item = (i64, i64)>) -> Self {
        let mut v: Vec<(i64, i64)> = ivs.into_iter().filter(|(l, h)| l <= h).collect();
        v.sort_unstable();
        let mut out: Vec<(i64, i64)> = Vec::with_capacity(v.len());
        for (l, h) in v {
            match out.last_mut() {
                Some(last) if (l as i128) <= last.1 as i128 + 1 => last.1 = last.1.max(h),
                _ => out.push((l, h)),
            }
        }
        MultiInterval { ivs: out }
    }

    /// Rounds a real interval outward to integers.
    pub fn from_real(lo: f64, hi: f64) -> Self {
        let cvt = |x: f64| {
            if x <= NEG_INF as f64 {
                NEG_INF
            } else if x >= POS_INF as f64 {
                POS_INF
            } else {
                x as i64
            }
        };
        Self::range(cvt(lo.floor()), cvt(hi.ceil()))
    }

    pub fn from_predicate(p: &ValuePredicate) -> Self {
        match p {
            ValuePredicate::Geq(c) => Self::range(*c, POS_INF),
            ValuePredicate::Range(lo, hi) => Self::range(*lo, *hi),
            ValuePredicate::Eq(c) => Self::singleton(*c),
            ValuePredicate::Or(ps) => ps
                .iter()
                .map(Self::from_predicate)
                .fold(Self::bottom(), |a, b| a.join(&b)),
        }
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.ivs
    }

    pub fn is_bottom(&self) -> bool {
        self.ivs.is_empty()
    }

    pub fn is_top(&self) -> bool {
        self.ivs == [(NEG_INF, POS_INF)]
    }

    pub fn lower(&self) -> Option<i64> {
        self.ivs.first().map(|i| i.0)
    }

    pub fn upper(&self) -> Option<i64> {
        self.ivs.last().map(|i| i.1)
    }

    pub fn as_singleton(&self) -> Option<i64> {
        match self.ivs.as_slice() {
            [(l, h)] if l == h && *l != NEG_INF && *h != POS_INF => Some(*l),
            _ => None,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.ivs.iter().any(|&(l, h)| l <= v && v <= h)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.ivs
            .iter()
            .all(|&(l, h)| other.ivs.iter().any(|&(ol, oh)| ol <= l && h <= oh))
    }

    pub fn join(&self, other: &Self) -> Self {
        Self::from_intervals(self.ivs.iter().chain(other.ivs.iter()).copied())
    }

    pub fn meet(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for &(a, b) in &self.ivs {
            for &(c, d) in &other.ivs {
                let (l, h) = (a.max(c), b.min(d));
                if l <= h {
                    out.push((l, h));
                }
            }
        }
        Self::from_intervals(out)
    }

    /// Extrapolates unstable extreme bounds to infinity. Inner structure is
    /// kept only while it is unchanged, otherwise the hull is taken, so any
    /// widening chain stabilizes after a bounded number of steps.
    pub fn widen(&self, next: &Self) -> Self {
        let j = self.join(next);
        if j == *self {
            return self.clone();
        }
        if self.is_bottom() {
            return j;
        }
        let (amin, amax) = (self.lower().unwrap(), self.upper().unwrap());
        let (jmin, jmax) = (j.lower().unwrap(), j.upper().unwrap());
        let lo = if jmin < amin { NEG_INF } else { amin };
        let hi = if jmax > amax { POS_INF } else { amax };
        let inner = |m: &Self| -> Vec<i64> {
            let flat: Vec<i64> = m.ivs.iter().flat_map(|&(l, h)| [l, h]).collect();
            flat[1..flat.len() - 1].to_vec()
        };
        if j.ivs.len() == self.ivs.len() && inner(&j) == inner(self) {
            let mut ivs = j.ivs.clone();
            ivs[0].0 = lo;
            let n = ivs.len() - 1;
            ivs[n].1 = hi;
            Self::from_intervals(ivs)
        } else {
            Self::range(lo, hi)
        }
    }

    pub fn hull(&self) -> Self {
        match (self.lower(), self.upper()) {
            (Some(l), Some(h)) => Self::range(l, h),
            _ => Self::bottom(),
        }
    }

    /// Removes a single value.
    pub fn without(&self, v: i64) -> Self {
        let mut out = Vec::new();
        for &(l, h) in &self.ivs {
            if v < l || v > h {
                out.push((l, h));
                continue;
            }
            if l < v {
                out.push((l, v - 1));
            }
            if v < h {
                out.push((v + 1, h));
            }
        }
        Self::from_intervals(out)
    }

    fn map_pairs(&self, other: &Self, f: impl Fn((i64, i64), (i64, i64)) -> (i128, i128)) -> Self {
        let mut out = Vec::new();
        for &a in &self.ivs {
            for &b in &other.ivs {
                let (l, h) = f(a, b);
                out.push((narrow(l), narrow(h)));
            }
        }
        Self::from_intervals(out)
    }

    pub fn neg(&self) -> Self {
        Self::from_intervals(self.ivs.iter().map(|&(l, h)| (narrow(-wide(h)), narrow(-wide(l)))))
    }

    fn corners(a: (i64, i64), b: (i64, i64), f: impl Fn(i128, i128) -> i128) -> (i128, i128) {
        let vals = [
            f(wide(a.0), wide(b.0)),
            f(wide(a.0), wide(b.1)),
            f(wide(a.1), wide(b.0)),
            f(wide(a.1), wide(b.1)),
        ];
        (*vals.iter().min().unwrap(), *vals.iter().max().unwrap())
    }

    fn div(&self, divisor: &Self) -> Self {
        let nonzero = divisor.without(0);
        self.map_pairs(&nonzero, |a, b| {
            Self::corners(a, b, |x, y| if y.abs() >= 1 << 100 { 0 } else { x / y })
        })
    }

    fn rem(&self, divisor: &Self) -> Self {
        let nonzero = divisor.without(0);
        let (Some(dmin), Some(dmax)) = (nonzero.lower(), nonzero.upper()) else {
            return Self::bottom();
        };
        if let (Some(x), Some(y)) = (self.as_singleton(), nonzero.as_singleton()) {
            return Self::singleton(x % y);
        }
        let m = wide(dmax).max(-wide(dmin)) - 1;
        let mut out = Vec::new();
        for &(l, h) in &self.ivs {
            let lo = if l >= 0 { 0 } else { wide(l).max(-m) };
            let hi = if h <= 0 { 0 } else { wide(h).min(m) };
            out.push((narrow(lo), narrow(hi)));
        }
        Self::from_intervals(out)
    }

    fn compare(&self, op: BinaryOp, other: &Self) -> Self {
        let both = Self::range(0, 1);
        let (Some(amin), Some(amax), Some(bmin), Some(bmax)) =
            (self.lower(), self.upper(), other.lower(), other.upper())
        else {
            return Self::bottom();
        };
        let truth = |t: bool| Self::singleton(t as i64);
        match op {
            BinaryOp::Lt if amax < bmin => truth(true),
            BinaryOp::Lt if amin >= bmax => truth(false),
            BinaryOp::Le if amax <= bmin => truth(true),
            BinaryOp::Le if amin > bmax => truth(false),
            BinaryOp::Gt if amin > bmax => truth(true),
            BinaryOp::Gt if amax <= bmin => truth(false),
            BinaryOp::Ge if amin >= bmax => truth(true),
            BinaryOp::Ge if amax < bmin => truth(false),
            BinaryOp::Eq | BinaryOp::Ne => {
                let equal = match (self.as_singleton(), other.as_singleton()) {
                    (Some(x), Some(y)) if x == y => Some(true),
                    _ if self.meet(other).is_bottom() => Some(false),
                    _ => None,
                };
                match equal {
                    Some(e) => truth(e == (op == BinaryOp::Eq)),
                    None => both,
                }
            }
            _ => both,
        }
    }

    /// Abstract binary operation. The flag reports whether a division or
    /// remainder had a divisor set containing zero.
    pub fn binop(op: BinaryOp, a: &Self, b: &Self) -> (Self, bool) {
        if a.is_bottom() || b.is_bottom() {
            return (Self::bottom(), false);
        }
        let zero_div = matches!(op, BinaryOp::Div | BinaryOp::Rem) && b.contains(0);
        let r = match op {
            BinaryOp::Add => a.map_pairs(b, |x, y| (wide(x.0) + wide(y.0), wide(x.1) + wide(y.1))),
            BinaryOp::Sub => a.map_pairs(b, |x, y| (wide(x.0) - wide(y.1), wide(x.1) - wide(y.0))),
            BinaryOp::Mul => a.map_pairs(b, |x, y| Self::corners(x, y, |p, q| p.saturating_mul(q))),
            BinaryOp::Div => a.div(b),
            BinaryOp::Rem => a.rem(b),
            op if op.is_comparison() => a.compare(op, b),
            BinaryOp::LogAnd | BinaryOp::LogOr => {
                let ta = !(a == &Self::singleton(0));
                let fa = a.contains(0);
                let tb = !(b == &Self::singleton(0));
                let fb = b.contains(0);
                let (can_true, can_false) = if op == BinaryOp::LogAnd {
                    (ta && tb, fa || fb)
                } else {
                    (ta || tb, fa && fb)
                };
                Self::from_intervals(
                    [(can_false, (0, 0)), (can_true, (1, 1))]
                        .into_iter()
                        .filter(|(c, _)| *c)
                        .map(|(_, i)| i),
                )
            }
            _ => Self::top(),
        };
        (r, zero_div)
    }
}

impl fmt::Display for MultiInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ivs.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self
            .ivs
            .iter()
            .map(|&(l, h)| {
                if l == h {
                    fmt_bound(l)
                } else {
                    format!("[{}, {}]", fmt_bound(l), fmt_bound(h))
                }
            })
            .collect();
        if parts.len() == 1 {
            f.write_str(&parts[0])
        } else {
            write!(f, "{{{}}}", parts.join(", "))
        }
    }
}
