//! Refinement of the state along the two edges of a branch.

use super::*;
use crate::domains::SizeDep;
use crate::frontend::ast::BinaryOp;
use crate::ir::{Cond, Const};

fn negate(op: BinaryOp) -> BinaryOp {
    use BinaryOp::*;
    match op {
        Eq => Ne,
        Ne => Eq,
        Lt => Ge,
        Ge => Lt,
        Le => Gt,
        Gt => Le,
        other => other,
    }
}

fn flip(op: BinaryOp) -> BinaryOp {
    use BinaryOp::*;
    match op {
        Lt => Gt,
        Gt => Lt,
        Le => Ge,
        Ge => Le,
        other => other,
    }
}

fn refine_range(r: &MultiInterval, op: BinaryOp, c: i64) -> MultiInterval {
    use BinaryOp::*;
    match op {
        Eq => r.meet(&MultiInterval::singleton(c)),
        Ne => r.without(c),
        Lt if c == i64::MIN => MultiInterval::bottom(),
        Lt => r.meet(&MultiInterval::range(i64::MIN, c - 1)),
        Le => r.meet(&MultiInterval::range(i64::MIN, c)),
        Gt if c == i64::MAX => MultiInterval::bottom(),
        Gt => r.meet(&MultiInterval::range(c + 1, i64::MAX)),
        Ge => r.meet(&MultiInterval::range(c, i64::MAX)),
        _ => r.clone(),
    }
}

impl Analyzer<'_> {
    pub(super) fn branch(
        &mut self,
        mut st: AbstractState,
        cond: &Cond,
    ) -> (Option<AbstractState>, Option<AbstractState>) {
        let (op, a, b) = match cond {
            Cond::Compare(op, a, b) => {
                let va = self.eval_operand(&mut st, a);
                let vb = self.eval_operand(&mut st, b);
                self.nominal_binary(*op, &va, &vb, a.span().to(b.span()));
                (*op, va, vb)
            }
            Cond::Truthy(a) => {
                let va = self.eval_operand(&mut st, a);
                let zero = if va.ty.is_pointer() { Const::Null } else { Const::Int(0) };
                let vz = self.eval_operand(&mut st, &Operand::Const(zero, a.span()));
                (BinaryOp::Ne, va, vz)
            }
        };
        let t = self.refine(st.clone(), op, &a, &b);
        let e = self.refine(st, negate(op), &a, &b);
        (t, e)
    }

    fn refine(&self, mut st: AbstractState, op: BinaryOp, a: &Value, b: &Value) -> Option<AbstractState> {
        if !a.ty.is_pointer() && !b.ty.is_pointer() {
            let (r, _) = MultiInterval::binop(op, &a.facts.range, &b.facts.range);
            if r.as_singleton() == Some(0) {
                return None;
            }
        }
        if !self.refine_side(&mut st, op, a, b) || !self.refine_side(&mut st, flip(op), b, a) {
            return None;
        }
        Some(st)
    }

    /// Refines the location `x` was read from by `x op y`. Returns false
    /// when the edge is infeasible.
    fn refine_side(&self, st: &mut AbstractState, op: BinaryOp, x: &Value, y: &Value) -> bool {
        let Some(loc) = x.strong_loc().cloned() else {
            return true;
        };
        let mut f = self.facts_at(st, &loc, &x.ty);
        if x.ty.is_pointer() {
            let y_null = y.konst
                && (y.facts.refs.only_null() == y.facts.refs && !y.facts.refs.is_empty()
                    || y.facts.range.as_singleton() == Some(0) && !y.ty.is_pointer());
            if !y_null {
                return true;
            }
            match op {
                BinaryOp::Eq => {
                    if f.ts.contains(&Atom::Sentinel(Sentinel::Null)) {
                        let only = f.ts.only_sentinel();
                        if only.is_bottom() {
                            return false;
                        }
                        f.ts = only;
                        st.pending.remove(&loc);
                    }
                    if !f.refs.is_empty() && f.refs.only_null().is_empty() && !f.refs.contains(&Loc::Unknown) {
                        return false;
                    }
                    f.refs = ReferentSet::of(Loc::Null);
                    st.set(loc, f);
                }
                BinaryOp::Ne => {
                    if f.ts.is_only_sentinel() {
                        return false;
                    }
                    let had = f.ts.has_sentinel();
                    f.ts = f.ts.without_sentinel();
                    f.refs = f.refs.non_null();
                    st.set(loc.clone(), f);
                    if had {
                        self.apply_pending(st, &loc);
                    }
                }
                _ => {}
            }
            return true;
        }
        let Some(c) = y.facts.range.as_singleton() else {
            return true;
        };
        let had = f.ts.has_sentinel();
        let r = refine_range(&f.range, op, c);
        if r.is_bottom() {
            return false;
        }
        f.range = r;
        for s in f.ts.sentinels().collect::<Vec<_>>() {
            if let Some(v) = sentinel_value(s) {
                if !f.range.contains(v) {
                    f.ts.remove(&Atom::Sentinel(s));
                } else if f.range.as_singleton() == Some(v) {
                    f.ts = f.ts.only_sentinel();
                }
            }
        }
        if f.ts.is_bottom() {
            return false;
        }
        let lost = had && !f.ts.has_sentinel();
        let only = f.ts.is_only_sentinel();
        let zero = f.range.as_singleton() == Some(0);
        st.set(loc.clone(), f);
        if lost {
            self.apply_pending(st, &loc);
        } else if only {
            st.pending.remove(&loc);
        }
        match &loc {
            Loc::Var(id) if zero => Self::zero_size(st, id),
            _ => true,
        }
    }

    /// A size known to be zero makes every allocation sized by it NULL.
    fn zero_size(st: &mut AbstractState, id: &str) -> bool {
        let dep = SizeDep::Var(id.to_string());
        let sites: Vec<u32> = st
            .alloc_size
            .iter()
            .filter(|(_, d)| **d == dep)
            .map(|(s, _)| *s)
            .collect();
        for site in sites {
            let holders: Vec<Loc> = st
                .places
                .iter()
                .filter(|(_, f)| f.ts.owned().any(|r| r.site == site))
                .map(|(l, _)| l.clone())
                .collect();
            for l in holders {
                let mut f = st.places[&l].clone();
                let only = f.ts.only_sentinel();
                if only.is_bottom() {
                    return false;
                }
                f.ts = only;
                f.refs = f.refs.only_null();
                st.set(l.clone(), f);
                st.pending.remove(&l);
            }
        }
        true
    }
}
