//! Transfer functions for instructions.

use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::annotations::tables::Ownership;
use crate::annotations::types::{CType, IntKind};
use crate::domains::BlockKind;
use crate::domains::{Effect, SizeDep};
use crate::frontend::ast::{BinaryOp, UnaryOp};
use crate::ir::{Arg, Const, Instr, InstrKind, Place, Proj};

#[derive(Clone, Copy, PartialEq, Eq)]
pub(super) enum Access {
    Read,
    Write,
    Addr,
}

pub(super) struct Located {
    pub locs: Vec<Loc>,
    pub strong: bool,
    /// Every location the access goes through.
    pub touched: Vec<Loc>,
}

fn base_loc(p: &Place) -> Loc {
    if p.global {
        Loc::Global(p.base.clone())
    } else {
        Loc::var(&p.base)
    }
}

fn root_id(p: &Place) -> Option<&str> {
    (!p.global).then_some(p.base.as_str())
}

fn prefix(p: &Place, n: usize) -> Place {
    Place {
        base: p.base.clone(),
        global: p.global,
        projs: p.projs[..n].to_vec(),
        tys: p.tys[..=n].to_vec(),
        span: p.span,
    }
}

fn unary_name(op: &str) -> &'static str {
    match op {
        "++" => "increment",
        "--" => "decrement",
        "-" => "negation",
        "+" => "unary plus",
        "!" => "logical negation",
        _ => "bitwise complement",
    }
}

fn binary_name(op: BinaryOp) -> &'static str {
    use BinaryOp::*;
    match op {
        Mul => "multiplication",
        Div => "division",
        Rem => "remainder",
        Add => "addition",
        Sub => "subtraction",
        Shl | Shr => "shift",
        BitAnd | BitXor | BitOr => "bitwise operation",
        LogAnd | LogOr => "logical operation",
        _ => "comparison",
    }
}

/// Locations that stand for nothing writable.
fn is_opaque(l: &Loc) -> bool {
    matches!(l.root(), Loc::Unknown | Loc::Null | Loc::Str)
}

impl Analyzer<'_> {
    /// What is known about `loc`, deriving facts for locations the state
    /// does not mention.
    pub(super) fn facts_at(&self, st: &AbstractState, loc: &Loc, ty: &QualType) -> PlaceFacts {
        if let Some(f) = st.get(loc) {
            return f.clone();
        }
        let ts = match loc {
            Loc::Field(base, _) => self.facts_at(st, base, ty).ts.map(|a| match a {
                Atom::Uninitialized => Atom::Uninitialized,
                Atom::Finalized => Atom::Finalized,
                Atom::Released => Atom::Released,
                _ => Atom::Initialized,
            }),
            _ => Typestate::of(Atom::Initialized),
        };
        let mut f = PlaceFacts::new(ts, ty.value_range());
        if ty.is_pointer() {
            f.refs = ReferentSet::of(Loc::Unknown);
        }
        f.nominal = NominalTag::of(self.tables.nominal_of(ty));
        f
    }

    pub(super) fn joined(&self, st: &AbstractState, locs: &[Loc], ty: &QualType) -> PlaceFacts {
        let mut it = locs.iter().map(|l| self.facts_at(st, l, ty));
        let first = it
            .next()
            .unwrap_or_else(|| PlaceFacts::new(Typestate::of(Atom::Initialized), ty.value_range()));
        it.fold(first, |a, b| a.join(&b))
    }

    fn write_locs(&self, st: &mut AbstractState, locs: &[Loc], facts: PlaceFacts, strong: bool, ty: &QualType) {
        let strong = strong && locs.len() == 1;
        for l in locs.iter().filter(|l| !is_opaque(l)) {
            if strong {
                st.remove(l);
                st.set(l.clone(), facts.clone());
            } else {
                let old = self.facts_at(st, l, ty);
                st.set(l.clone(), old.join(&facts));
            }
        }
    }

    fn kill_size_deps(st: &mut AbstractState, id: &str) {
        for dep in st.alloc_size.values_mut() {
            if *dep == SizeDep::Var(id.to_string()) {
                *dep = SizeDep::Killed;
            }
        }
    }

    pub(super) fn apply_pending(&self, st: &mut AbstractState, loc: &Loc) {
        let Some(effects) = st.pending.remove(loc) else {
            return;
        };
        for e in effects {
            match e {
                Effect::Initialize(t) => {
                    let mut f = st
                        .get(&t)
                        .cloned()
                        .unwrap_or_else(|| PlaceFacts::new(Typestate::bottom(), MultiInterval::top()));
                    f.ts = Typestate::of(Atom::Initialized);
                    st.set(t, f);
                }
            }
        }
    }

    /// Error recovery after a sentinel was used as an ordinary value: the
    /// location is assumed to hold the non-sentinel part from now on.
    fn collapse(&self, st: &mut AbstractState, locs: &[Loc], ty: &QualType) {
        let [l] = locs else {
            return;
        };
        if is_opaque(l) {
            return;
        }
        let mut f = self.facts_at(st, l, ty);
        for s in f.ts.sentinels().collect::<Vec<_>>() {
            if let Some(v) = sentinel_value(s) {
                let r = f.range.without(v);
                if !r.is_bottom() {
                    f.range = r;
                }
            }
        }
        let rest = f.ts.without_sentinel();
        f.ts = if rest.is_bottom() {
            Typestate::of(Atom::Initialized)
        } else {
            rest
        };
        f.refs = f.refs.non_null();
        st.set(l.clone(), f);
        self.apply_pending(st, l);
    }

    fn check_readable(&mut self, f: &PlaceFacts, text: &str, span: Span) {
        let ts = &f.ts;
        if ts.contains(&Atom::MovedOut) {
            self.emit(Diagnostic::new(Code::UseAfterMove, span, [("place", text)]));
        } else if ts.contains(&Atom::Released) {
            self.emit(Diagnostic::new(Code::UseAfterRelease, span, [("place", text)]));
        }
        let actual = if ts.contains(&Atom::Uninitialized) {
            if ts.atoms().len() == 1 {
                "uninitialized"
            } else {
                "possibly uninitialized"
            }
        } else if ts.contains(&Atom::Finalized) {
            "finalized"
        } else {
            return;
        };
        self.emit(Diagnostic::new(
            Code::UninitUse,
            span,
            [("place", text), ("actual", actual)],
        ));
    }

    fn check_unsafe(&mut self, st: &AbstractState, ty: &QualType, whole: &str, span: Span) {
        for k in self.tables.props_of(ty).unsafe_kinds {
            if st.in_block(&k).is_none() {
                self.emit(Diagnostic::new(
                    Code::UnsafeAccess,
                    span,
                    [
                        ("what", format!("'{whole}'")),
                        ("kind", k),
                        ("place", whole.to_string()),
                    ],
                ));
            }
        }
    }

    /// Reports accesses that conflict with a live declared borrow.
    fn check_conflicts(
        &mut self,
        st: &AbstractState,
        root: Option<&str>,
        touched: &[Loc],
        write: bool,
        text: &str,
        span: Span,
    ) {
        let live: Vec<String> = self.live_now().iter().cloned().collect();
        for b in live {
            if Some(b.as_str()) == root || borrow_kind(self.cfg, &b).is_none() {
                continue;
            }
            let Some(f) = st.get(&Loc::var(&b)) else {
                continue;
            };
            let excl = f.ts.contains(&Atom::BorrowedExclusive);
            let shared = f.ts.contains(&Atom::BorrowedShared);
            if !(excl || shared && write) {
                continue;
            }
            let overlap = f
                .refs
                .non_null()
                .iter()
                .filter(|r| !is_opaque(r))
                .any(|r| touched.iter().any(|t| t.is_within(r) || r.is_within(t)));
            if !overlap {
                continue;
            }
            let name = self.cfg.name_of(&b);
            let detail = if excl {
                format!("'{text}' is used while '{name}' holds an exclusive borrow of it")
            } else {
                format!("'{text}' is modified while '{name}' holds a shared borrow of it")
            };
            self.emit(Diagnostic::new(
                Code::ExclViolation,
                span,
                [("detail", detail), ("place", text.to_string())],
            ));
        }
    }

    /// Resolves a place to the locations it denotes, checking every
    /// pointer it goes through.
    pub(super) fn locate(&mut self, st: &mut AbstractState, p: &Place, access: Access) -> Located {
        let cfg = self.cfg;
        let whole = cfg.place_text(p);
        let mut locs = vec![base_loc(p)];
        let mut strong = true;
        let mut touched = locs.clone();
        let last_deref = p.projs.iter().rposition(|x| !matches!(x, Proj::Field(_)));
        for (i, proj) in p.projs.iter().enumerate() {
            let here = &p.tys[i];
            match proj {
                Proj::Field(f) => {
                    self.check_unsafe(st, here, &whole, p.span);
                    locs = locs
                        .iter()
                        .filter(|l| **l != Loc::Null)
                        .map(|l| match l {
                            Loc::Unknown => Loc::Unknown,
                            l => l.clone().field(f),
                        })
                        .collect();
                }
                Proj::Deref | Proj::Index(_) => {
                    if matches!(here.ty, CType::Array(_)) {
                        strong = false;
                    } else {
                        let text = cfg.place_text(&prefix(p, i));
                        let ptr = self.joined(st, &locs, here);
                        self.check_readable(&ptr, &text, p.span);
                        if let Some(s) = ptr.ts.sentinels().next() {
                            self.emit(Diagnostic::new(
                                Code::OptDeref,
                                p.span,
                                [
                                    ("place", text.clone()),
                                    ("sentinel", s.to_string()),
                                    ("role", "deref".to_string()),
                                ],
                            ));
                            self.collapse(st, &locs, here);
                        }
                        if access == Access::Write && Some(i) == last_deref && ptr.ts.contains(&Atom::BorrowedShared) {
                            self.emit(Diagnostic::new(
                                Code::ExclViolation,
                                p.span,
                                [
                                    (
                                        "detail",
                                        format!("'{whole}' is modified through the shared reference '{text}'"),
                                    ),
                                    ("place", whole.clone()),
                                ],
                            ));
                        }
                        let targets: Vec<Loc> = ptr.refs.non_null().iter().cloned().collect();
                        locs = if targets.is_empty() {
                            vec![Loc::Unknown]
                        } else {
                            targets
                        };
                        let pointee = &p.tys[i + 1];
                        // An owner never points to released memory.
                        let owner = ptr.ts.owned().next().is_some()
                            && ptr
                                .ts
                                .atoms()
                                .iter()
                                .all(|a| matches!(a, Atom::OwnedValid(_) | Atom::Sentinel(_)));
                        if !owner
                            && !ptr.ts.contains(&Atom::MovedOut)
                            && locs
                                .iter()
                                .any(|t| self.facts_at(st, t, pointee).ts.contains(&Atom::Released))
                        {
                            self.emit(Diagnostic::new(Code::UseAfterRelease, p.span, [("place", text)]));
                        }
                        self.check_unsafe(st, pointee, &whole, p.span);
                    }
                    if let Proj::Index(idx) = proj {
                        strong = false;
                        let v = self.eval_operand(st, idx);
                        let first = v.facts.ts.sentinels().next();
                        if let Some(s) = first {
                            self.emit(Diagnostic::new(
                                Code::OptDeref,
                                p.span,
                                [
                                    ("place", cfg.operand_text(idx)),
                                    ("sentinel", s.to_string()),
                                    ("role", "index".to_string()),
                                ],
                            ));
                            if v.strong {
                                self.collapse(st, &v.src, &v.ty);
                            }
                        }
                    }
                    touched.extend(locs.iter().cloned());
                }
            }
        }
        touched.extend(locs.iter().cloned());
        if locs.len() != 1 || locs.iter().any(is_opaque) {
            strong = false;
        }
        let _ = access;
        Located { locs, strong, touched }
    }

    fn const_value(&self, c: &Const) -> Value {
        let init = || Typestate::of(Atom::Initialized);
        let (facts, ty) = match c {
            Const::Int(v) => (
                PlaceFacts::new(init(), MultiInterval::singleton(*v)),
                QualType::int(IntKind::Int),
            ),
            Const::Float(v) => (
                PlaceFacts::new(init(), MultiInterval::from_real(*v, *v)),
                QualType::plain(CType::Double),
            ),
            Const::Null => {
                let mut f = PlaceFacts::new(
                    Typestate::of(Atom::Sentinel(Sentinel::Null)),
                    MultiInterval::singleton(0),
                );
                f.refs = ReferentSet::of(Loc::Null);
                (f, QualType::pointer_to(QualType::plain(CType::Void)))
            }
            Const::Str(_) => {
                let mut f = PlaceFacts::new(init(), MultiInterval::top());
                f.refs = ReferentSet::of(Loc::Str);
                (f, QualType::pointer_to(QualType::int(IntKind::Char).constant()))
            }
        };
        Value {
            facts,
            src: Vec::new(),
            strong: false,
            konst: true,
            ty,
        }
    }

    /// An integer constant 0 converted to a pointer is NULL.
    fn null_constant(&self, v: Value) -> Value {
        if v.konst && !v.ty.is_pointer() && v.facts.range.as_singleton() == Some(0) {
            self.const_value(&Const::Null)
        } else {
            v
        }
    }

    fn address_of(&mut self, st: &mut AbstractState, p: &Place) -> Value {
        let l = self.locate(st, p, Access::Addr);
        let text = self.cfg.place_text(p);
        self.check_conflicts(st, root_id(p), &l.touched, false, &text, p.span);
        let mut facts = PlaceFacts::new(Typestate::of(Atom::Initialized), MultiInterval::top());
        for loc in l.locs {
            facts.refs.insert(loc);
        }
        let pointee = match &p.ty().ty {
            CType::Array(e) => (**e).clone(),
            _ => p.ty().clone(),
        };
        Value {
            facts,
            src: Vec::new(),
            strong: false,
            konst: false,
            ty: QualType::pointer_to(pointee),
        }
    }

    pub(super) fn eval_operand(&mut self, st: &mut AbstractState, o: &Operand) -> Value {
        match o {
            Operand::Const(c, _) => self.const_value(c),
            Operand::AddrOf(p) => self.address_of(st, p),
            Operand::Copy(p) if matches!(p.ty().ty, CType::Array(_)) => self.address_of(st, p),
            Operand::Copy(p) => {
                let l = self.locate(st, p, Access::Read);
                let facts = self.joined(st, &l.locs, p.ty());
                let text = self.cfg.place_text(p);
                let indirect = p.projs.iter().any(|x| !matches!(x, Proj::Field(_)));
                if indirect && facts.ts.contains(&Atom::Released) {
                    // Already reported on the pointer.
                    let mut rest = facts.clone();
                    rest.ts.remove(&Atom::Released);
                    self.check_readable(&rest, &text, p.span);
                } else {
                    self.check_readable(&facts, &text, p.span);
                }
                let mut touched = l.touched;
                touched.extend(facts.refs.non_null().iter().cloned());
                self.check_conflicts(st, root_id(p), &touched, false, &text, p.span);
                Value {
                    facts,
                    src: l.locs,
                    strong: l.strong,
                    konst: false,
                    ty: p.ty().clone(),
                }
            }
        }
    }

    fn type_text(v: &Value) -> String {
        match v.facts.nominal.name() {
            Some(n) => n.to_string(),
            None => v.ty.to_string(),
        }
    }

    /// Nominal type of `a op b`, reporting operations the declared
    /// operation table does not permit.
    pub(super) fn nominal_binary(&mut self, op: BinaryOp, a: &Value, b: &Value, span: Span) -> NominalTag {
        let (x, y) = (&a.facts.nominal, &b.facts.nominal);
        if *x == NominalTag::Mixed || *y == NominalTag::Mixed {
            return NominalTag::Plain;
        }
        if *x == NominalTag::Plain && *y == NominalTag::Plain {
            return NominalTag::Plain;
        }
        let report = |this: &mut Self| {
            this.emit(Diagnostic::new(
                Code::NominalOp,
                span,
                [
                    ("operation", binary_name(op).to_string()),
                    ("type", Self::type_text(a)),
                    ("rhs", Self::type_text(b)),
                ],
            ));
        };
        if op.is_comparison() || op.is_logical() {
            if let (NominalTag::Named(p), NominalTag::Named(q)) = (x, y) {
                if p != q {
                    report(self);
                }
            }
            return NominalTag::Plain;
        }
        match self.tables.nominal.binary_result(op.as_str(), x.name(), y.name()) {
            Some(r) => NominalTag::of(r),
            None => {
                report(self);
                NominalTag::Mixed
            }
        }
    }

    fn nominal_unary(&mut self, op: &str, v: &Value, span: Span) -> Option<NominalTag> {
        let NominalTag::Named(n) = &v.facts.nominal else {
            return Some(NominalTag::Plain);
        };
        match self.tables.nominal.unary_result(op, Some(n)) {
            Some(r) => Some(NominalTag::of(r)),
            None => {
                self.emit(Diagnostic::new(
                    Code::NominalOp,
                    span,
                    [("operation", unary_name(op)), ("type", n.as_str())],
                ));
                None
            }
        }
    }

    fn arith(op: BinaryOp, a: &Value, b: &Value) -> PlaceFacts {
        let init = Typestate::of(Atom::Initialized);
        if !op.is_comparison() && !op.is_logical() {
            if a.ty.is_pointer() && b.ty.is_pointer() {
                return PlaceFacts::new(init, MultiInterval::top());
            }
            if let Some(p) = [a, b].into_iter().find(|v| v.ty.is_pointer()) {
                let mut f = PlaceFacts::new(init, MultiInterval::top());
                f.refs = p.facts.refs.non_null();
                return f;
            }
            if a.ty.ty == CType::Double || b.ty.ty == CType::Double {
                return PlaceFacts::new(init, MultiInterval::top());
            }
        }
        let (r, _) = MultiInterval::binop(op, &a.facts.range, &b.facts.range);
        PlaceFacts::new(init, r)
    }

    fn eval_rvalue(&mut self, st: &mut AbstractState, r: &Rvalue, span: Span) -> Value {
        match r {
            Rvalue::Use(o) => self.eval_operand(st, o),
            Rvalue::Binary(op, a, b) => {
                let va = self.eval_operand(st, a);
                let vb = self.eval_operand(st, b);
                let tag = self.nominal_binary(*op, &va, &vb, a.span().to(b.span()));
                let mut facts = Self::arith(*op, &va, &vb);
                facts.nominal = tag;
                let ty = if op.is_comparison() || op.is_logical() {
                    QualType::int(IntKind::Int)
                } else if vb.ty.is_pointer() && !va.ty.is_pointer() {
                    vb.ty.clone()
                } else {
                    va.ty.clone()
                };
                Value {
                    facts,
                    src: Vec::new(),
                    strong: false,
                    konst: va.konst && vb.konst,
                    ty,
                }
            }
            Rvalue::Unary(op, o) => {
                let v = self.eval_operand(st, o);
                let tag = self.nominal_unary(op.as_str(), &v, span).unwrap_or(NominalTag::Mixed);
                let range = match op {
                    UnaryOp::Neg => v.facts.range.neg(),
                    UnaryOp::Plus => v.facts.range.clone(),
                    UnaryOp::Not => match v.facts.range.as_singleton() {
                        Some(0) => MultiInterval::singleton(1),
                        _ if !v.facts.range.contains(0) => MultiInterval::singleton(0),
                        _ => MultiInterval::range(0, 1),
                    },
                    _ => MultiInterval::top(),
                };
                let mut facts = PlaceFacts::new(Typestate::of(Atom::Initialized), range);
                facts.nominal = tag;
                Value {
                    facts,
                    src: Vec::new(),
                    strong: false,
                    konst: v.konst,
                    ty: v.ty,
                }
            }
            Rvalue::Cast {
                operand,
                ty,
                drops_const,
            } => {
                let mut v = self.eval_operand(st, operand);
                if *drops_const {
                    self.emit(Diagnostic::new(
                        Code::ConstCast,
                        operand.span(),
                        [("place", self.cfg.operand_text(operand))],
                    ));
                }
                v.facts.nominal = match self.tables.nominal_of(ty) {
                    Some(r) => NominalTag::Named(r),
                    None if ty.is_scalar_number() => NominalTag::Plain,
                    None => v.facts.nominal,
                };
                if ty.is_scalar_number() && !v.facts.range.is_subset(&ty.value_range()) {
                    v.facts.range = ty.value_range();
                }
                if *drops_const && v.facts.ts.contains(&Atom::BorrowedShared) {
                    v.facts.ts = v.facts.ts.map(|a| match a {
                        Atom::BorrowedShared => Atom::BorrowedExclusive,
                        a => a.clone(),
                    });
                }
                v.ty = ty.clone();
                v
            }
        }
    }

    /// Another location that definitely or possibly owns `r`.
    fn held_elsewhere(st: &AbstractState, r: &ResourceId, except: &Loc) -> bool {
        st.places
            .iter()
            .any(|(l, f)| l != except && f.ts.owned().any(|x| x == r))
    }

    /// Writes `v` into `dest`. Returns the destination when it is a single
    /// strongly updated location.
    pub(super) fn store(&mut self, st: &mut AbstractState, dest: &Place, v: Value, span: Span) -> Option<Loc> {
        let l = self.locate(st, dest, Access::Write);
        let text = self.cfg.place_text(dest);
        self.check_conflicts(st, root_id(dest), &l.touched, true, &text, dest.span);
        let dest_ty = dest.ty();
        let dest_loc = (l.strong && l.locs.len() == 1).then(|| l.locs[0].clone());
        let v = if dest_ty.is_pointer() { self.null_constant(v) } else { v };
        let mut facts = v.facts.clone();
        let mut moved_pending = None;
        let borrow = match root_id(dest) {
            Some(id) if dest.is_var() => borrow_kind(self.cfg, id),
            _ => None,
        };
        if let Some(k) = borrow {
            let atom = match k {
                RefKind::Shared => Atom::BorrowedShared,
                RefKind::Exclusive => Atom::BorrowedExclusive,
            };
            facts.ts = facts.ts.map(|a| match a {
                Atom::OwnedValid(_) | Atom::Initialized => atom.clone(),
                a => a.clone(),
            });
        } else if facts.ts.owned().next().is_some() {
            {
                {
                    if let Some(src) = v.strong_loc().filter(|s| Some(*s) != dest_loc.as_ref()) {
                        let mut f = self.facts_at(st, src, &v.ty);
                        f.ts = Typestate::of(Atom::MovedOut);
                        f.refs = ReferentSet::empty();
                        st.set(src.clone(), f);
                        moved_pending = st.pending.remove(src);
                    }
                }
            }
        }
        if let Some(root) = self.tables.nominal_of(dest_ty) {
            let actual = match &facts.nominal {
                NominalTag::Named(x) if *x != root => Some(x.clone()),
                NominalTag::Plain if !v.konst => Some(v.ty.to_string()),
                _ => None,
            };
            if let Some(actual) = actual {
                self.emit(Diagnostic::new(
                    Code::NominalMix,
                    span,
                    [("actual", actual), ("expected", root.clone()), ("place", text.clone())],
                ));
            }
            if facts.nominal != NominalTag::Mixed {
                facts.nominal = NominalTag::Named(root);
            }
        }
        if dest_ty.is_scalar_number() {
            let r = dest_ty.value_range();
            if !facts.range.is_subset(&r) {
                facts.range = r;
            }
        }
        if let Some(d) = &dest_loc {
            let old = self.facts_at(st, d, dest_ty);
            for r in old.ts.owned() {
                if !facts.ts.owned().any(|x| x == r) && !Self::held_elsewhere(st, r, d) {
                    self.emit(Diagnostic::new(
                        Code::OwnLeak,
                        span,
                        [("place", text.clone()), ("resource-class", r.class.clone())],
                    ));
                }
            }
        }
        self.write_locs(st, &l.locs, facts, l.strong, dest_ty);
        if let Some(id) = root_id(dest).filter(|_| dest.is_var()) {
            Self::kill_size_deps(st, id);
        }
        if let (Some(d), Some(p)) = (&dest_loc, moved_pending) {
            st.pending.insert(d.clone(), p);
        }
        dest_loc
    }

    pub(super) fn instr(&mut self, st: &mut AbstractState, ins: &Instr) {
        match &ins.kind {
            InstrKind::Declare(id) => {
                let l = Loc::var(id);
                st.remove(&l);
                let ty = &self.cfg.locals[id].ty;
                st.set(l, PlaceFacts::new(Typestate::of(Atom::Uninitialized), ty.value_range()));
                Self::kill_size_deps(st, id);
            }
            InstrKind::Assign {
                dest,
                value,
                incdec: Some(op),
            } => {
                let v = self.eval_operand(st, &Operand::Copy(dest.clone()));
                let Some(tag) = self.nominal_unary(op.as_str(), &v, ins.span) else {
                    return;
                };
                let mut facts = if v.ty.is_pointer() {
                    v.facts.clone()
                } else {
                    let one = self.const_value(&Const::Int(1));
                    let bop = match value {
                        Rvalue::Binary(b, ..) => *b,
                        _ => BinaryOp::Add,
                    };
                    Self::arith(bop, &v, &one)
                };
                facts.nominal = tag;
                let nv = Value {
                    facts,
                    src: Vec::new(),
                    strong: false,
                    konst: false,
                    ty: v.ty,
                };
                self.store(st, dest, nv, ins.span);
            }
            InstrKind::Assign { dest, value, .. } => {
                let v = self.eval_rvalue(st, value, ins.span);
                self.store(st, dest, v, ins.span);
            }
            InstrKind::Call {
                dest,
                callee,
                args,
                site,
            } => self.call(st, dest.as_ref(), callee, args, *site, ins.span),
            InstrKind::Enter(kind, name) => {
                if *kind == BlockKind::Unchecked && !self.cfg.signature.unsafe_kinds.contains(name) {
                    self.emit(Diagnostic::new(
                        Code::UnsafePropagate,
                        ins.span,
                        [("kind", name.as_str()), ("function", self.cfg.function.as_str())],
                    ));
                }
                st.blocks.push((*kind, name.clone()));
            }
            InstrKind::Exit(kind, name) => {
                if let Some(i) = st.blocks.iter().rposition(|(k, n)| k == kind && n == name) {
                    st.blocks.remove(i);
                }
            }
            InstrKind::ScopeEnd(ids) => self.scope_end(st, ids, ins.span),
        }
    }

    fn scope_end(&mut self, st: &mut AbstractState, ids: &[String], span: Span) {
        let dying: BTreeSet<Loc> = ids.iter().map(|id| Loc::var(id)).collect();
        let mut leaked: BTreeMap<ResourceId, String> = BTreeMap::new();
        for id in ids {
            let Some(f) = st.get(&Loc::var(id)) else {
                continue;
            };
            for r in f.ts.owned() {
                let outside = st
                    .places
                    .iter()
                    .any(|(l, g)| !dying.contains(l.root()) && g.ts.owned().any(|x| x == r));
                if !outside {
                    leaked.entry(r.clone()).or_insert_with(|| id.clone());
                }
            }
        }
        for (r, id) in leaked {
            self.emit(Diagnostic::new(
                Code::OwnLeak,
                span,
                [
                    ("place", self.cfg.name_of(&id).to_string()),
                    ("resource-class", r.class),
                ],
            ));
        }
        for id in ids {
            self.check_finalized(st, id, span);
        }
        for id in ids {
            st.remove(&Loc::var(id));
            Self::kill_size_deps(st, id);
        }
    }

    pub(super) fn check_finalized(&mut self, st: &AbstractState, id: &str, span: Span) {
        let Some(local) = self.cfg.locals.get(id) else {
            return;
        };
        if local.kind != LocalKind::Var || !self.tables.props_of(&local.ty).fini_required {
            return;
        }
        if st.get(&Loc::var(id)).is_some_and(|f| f.ts.contains(&Atom::Initialized)) {
            self.emit(Diagnostic::new(
                Code::FiniMissing,
                span,
                [("place", local.name.clone()), ("type", local.ty.to_string())],
            ));
        }
    }

    fn arg_text(&self, o: &Operand) -> String {
        match o {
            Operand::Copy(p) | Operand::AddrOf(p) => self.cfg.place_text(p),
            other => self.cfg.operand_text(other),
        }
    }

    /// Text naming what an argument refers to.
    fn referent_text(&self, o: &Operand) -> String {
        match o {
            Operand::AddrOf(p) => self.cfg.place_text(p),
            Operand::Copy(p) => format!("*{}", self.cfg.place_text(p)),
            other => self.cfg.operand_text(other),
        }
    }

    fn referents(v: &Value) -> Vec<Loc> {
        v.facts
            .refs
            .non_null()
            .iter()
            .filter(|l| !is_opaque(l))
            .cloned()
            .collect()
    }

    fn call(
        &mut self,
        st: &mut AbstractState,
        dest: Option<&Place>,
        callee: &str,
        args: &[Arg],
        site: u32,
        span: Span,
    ) {
        let tables = self.tables;
        let Some(info) = tables.function(callee) else {
            return;
        };
        let sig = &info.signature;
        let annotated = sig.annotated || info.from_model;
        let mut vals: Vec<Value> = args.iter().map(|a| self.eval_operand(st, &a.value)).collect();
        for (i, v) in vals.iter_mut().enumerate() {
            if sig.params.get(i).is_some_and(|p| p.contract.ty.is_pointer()) {
                *v = self.null_constant(v.clone());
            }
        }
        let texts: Vec<String> = args.iter().map(|a| self.arg_text(&a.value)).collect();
        let mut moves = Vec::new();
        for (i, (a, v)) in args.iter().zip(&vals).enumerate() {
            let param = sig.params.get(i);
            let pname = param
                .map(|p| p.name.clone())
                .filter(|n| !n.is_empty())
                .unwrap_or_else(|| format!("#{}", i + 1));
            if let Some(s) = v.facts.ts.sentinels().next() {
                if param.is_none_or(|p| p.contract.optional.is_none()) {
                    self.emit(Diagnostic::new(
                        Code::OptArg,
                        a.span,
                        [
                            ("place", texts[i].clone()),
                            ("sentinel", s.to_string()),
                            ("param", pname.clone()),
                            ("callee", callee.to_string()),
                        ],
                    ));
                }
            }
            let owned: Vec<ResourceId> = v.facts.ts.owned().cloned().collect();
            let Some(pc) = param.map(|p| &p.contract) else {
                if !annotated && !owned.is_empty() {
                    self.own_unclear(span, &texts[i], callee, &owned[0]);
                }
                continue;
            };
            if let Some(root) = &pc.nominal {
                let actual = match &v.facts.nominal {
                    NominalTag::Named(x) if x != root => Some(x.clone()),
                    NominalTag::Plain if !v.konst => Some(v.ty.to_string()),
                    _ => None,
                };
                if let Some(actual) = actual {
                    self.emit(Diagnostic::new(
                        Code::NominalMix,
                        a.span,
                        [
                            ("actual", actual),
                            ("expected", root.clone()),
                            ("place", texts[i].clone()),
                        ],
                    ));
                }
            }
            let referents = Self::referents(v);
            match pc.ownership {
                Ownership::Borrow => {
                    if !annotated && !owned.is_empty() {
                        self.own_unclear(span, &texts[i], callee, &owned[0]);
                    }
                }
                Ownership::Owning | Ownership::Release => {
                    let ts = &v.facts.ts;
                    if owned.is_empty() {
                        let already = ts.contains(&Atom::MovedOut) || ts.contains(&Atom::Released);
                        if !ts.is_only_sentinel() && !already {
                            self.release_invalid(a.span, &texts[i], callee, "it is not an owning reference");
                        }
                    } else if pc.ownership == Ownership::Release {
                        let fini = v.ty.pointee().is_some_and(|pt| tables.props_of(pt).fini_required);
                        let live = referents
                            .iter()
                            .any(|r| st.get(r).is_some_and(|f| f.ts.contains(&Atom::Initialized)));
                        if fini && live {
                            self.release_invalid(a.span, &texts[i], callee, "the resource has not been finalized");
                        }
                    }
                    moves.push(i);
                }
            }
            if let Some(pointee) = pc.ty.pointee() {
                if pc.init == InitMode::RequiresInit && pc.ownership != Ownership::Release && !referents.is_empty() {
                    let pt = v.ty.pointee().unwrap_or(pointee).clone();
                    let rf = self.joined(st, &referents, &pt);
                    let actual = if rf.ts.contains(&Atom::Uninitialized) {
                        Some(if rf.ts.atoms().len() == 1 {
                            "uninitialized"
                        } else {
                            "possibly uninitialized"
                        })
                    } else if rf.ts.contains(&Atom::Finalized) {
                        Some("finalized")
                    } else {
                        None
                    };
                    if let Some(actual) = actual {
                        self.emit(Diagnostic::new(
                            Code::UninitUse,
                            a.span,
                            [("place", self.referent_text(&a.value)), ("actual", actual.to_string())],
                        ));
                    }
                }
            }
            if !pc.in_props.is_empty() {
                let targets = if pc.ty.pointee().is_some() {
                    referents.clone()
                } else {
                    v.src.clone()
                };
                let props = if targets.is_empty() {
                    crate::domains::PropertyMap::new()
                } else {
                    self.joined(st, &targets, &pc.ty).props
                };
                for (k, val) in &pc.in_props {
                    if !props.entails(k, val) {
                        self.emit(Diagnostic::new(
                            Code::PreViolation,
                            a.span,
                            [
                                ("expected", format!("{k}={val}")),
                                ("callee", callee.to_string()),
                                ("property", k.clone()),
                                ("actual", props.get(k).to_string()),
                                ("place", texts[i].clone()),
                            ],
                        ));
                    }
                }
            }
        }
        self.check_arg_aliasing(callee, sig, args, &vals, &texts);

        for &i in &moves {
            let v = &vals[i];
            if let Some(src) = v.strong_loc() {
                let mut f = self.facts_at(st, src, &v.ty);
                f.ts = Typestate::of(Atom::MovedOut);
                f.refs = ReferentSet::empty();
                st.set(src.clone(), f);
                st.pending.remove(src);
            }
            if sig.params[i].contract.ownership == Ownership::Release {
                for r in Self::referents(v) {
                    let mut f = self.facts_at(st, &r, &QualType::plain(CType::Void));
                    f.ts = Typestate::of(Atom::Released);
                    st.set(r, f);
                }
            }
        }
        let defer = sig.ret.optional.is_some() && dest.is_some();
        let mut deferred = BTreeSet::new();
        for (i, v) in vals.iter().enumerate() {
            let Some(p) = sig.params.get(i) else {
                continue;
            };
            let c = &p.contract;
            let referents = Self::referents(v);
            if c.init == InitMode::Initializes {
                for r in &referents {
                    if defer {
                        deferred.insert(Effect::Initialize(r.clone()));
                    } else {
                        self.set_ts(st, r, Atom::Initialized);
                    }
                }
            }
            if c.finalizes {
                for r in &referents {
                    self.set_ts(st, r, Atom::Finalized);
                }
            }
            if !c.out_props.is_empty() {
                let targets = if c.ty.pointee().is_some() {
                    referents
                } else {
                    v.src.clone()
                };
                for t in targets.iter().filter(|t| !is_opaque(t)) {
                    let mut f = self.facts_at(st, t, &c.ty);
                    for (k, val) in &c.out_props {
                        f.props.set(k, val);
                    }
                    st.set(t.clone(), f);
                }
            }
        }
        match dest {
            Some(d) => {
                let v = self.call_result(st, info, &vals, args, site);
                match self.store(st, d, v, span) {
                    Some(loc) if !deferred.is_empty() => {
                        st.pending.entry(loc).or_default().extend(deferred);
                    }
                    _ => {
                        for e in deferred {
                            let Effect::Initialize(r) = e;
                            self.set_ts(st, &r, Atom::Initialized);
                        }
                    }
                }
            }
            None => {
                if annotated && sig.ret.is_owning() {
                    let v = self.call_result(st, info, &vals, args, site);
                    let owned = v.facts.ts.owned().next().cloned();
                    if let Some(r) = owned {
                        self.emit(Diagnostic::new(
                            Code::OwnLeak,
                            span,
                            [("place", format!("{callee}()")), ("resource-class", r.class.clone())],
                        ));
                    }
                }
            }
        }
    }

    fn set_ts(&self, st: &mut AbstractState, l: &Loc, a: Atom) {
        if is_opaque(l) {
            return;
        }
        let mut f = self.facts_at(st, l, &QualType::plain(CType::Void));
        f.ts = Typestate::of(a);
        st.set(l.clone(), f);
    }

    fn own_unclear(&mut self, span: Span, place: &str, callee: &str, r: &ResourceId) {
        self.emit(Diagnostic::new(
            Code::OwnUnclear,
            span,
            [
                ("place", place.to_string()),
                ("callee", callee.to_string()),
                ("resource-class", r.class.clone()),
            ],
        ));
    }

    fn release_invalid(&mut self, span: Span, place: &str, callee: &str, detail: &str) {
        self.emit(Diagnostic::new(
            Code::ReleaseInvalid,
            span,
            [("place", place), ("callee", callee), ("detail", detail)],
        ));
    }

    /// Two arguments of one call that reach the same object while one of
    /// the parameters is an exclusive reference.
    fn check_arg_aliasing(
        &mut self,
        callee: &str,
        sig: &crate::annotations::AnnotatedSignature,
        args: &[Arg],
        vals: &[Value],
        texts: &[String],
    ) {
        let kind = |i: usize| {
            sig.params
                .get(i)
                .filter(|p| p.contract.ty.is_pointer())
                .and_then(|p| p.contract.ref_kind)
        };
        for j in 1..args.len() {
            for i in 0..j {
                let (Some(ki), Some(kj)) = (kind(i), kind(j)) else {
                    continue;
                };
                if ki != RefKind::Exclusive && kj != RefKind::Exclusive {
                    continue;
                }
                let ri = Self::referents(&vals[i]);
                let rj = Self::referents(&vals[j]);
                if !ri.iter().any(|a| rj.iter().any(|b| a.is_within(b) || b.is_within(a))) {
                    continue;
                }
                self.emit(Diagnostic::new(
                    Code::ExclViolation,
                    args[j].span,
                    [
                        (
                            "detail",
                            format!(
                                "'{}' and '{}' refer to the same object but '{callee}' takes one of them as an exclusive reference",
                                texts[i], texts[j]
                            ),
                        ),
                        ("place", texts[j].clone()),
                    ],
                ));
            }
        }
    }

    fn call_result(
        &self,
        st: &mut AbstractState,
        info: &crate::annotations::tables::FunctionInfo,
        vals: &[Value],
        args: &[Arg],
        site: u32,
    ) -> Value {
        let sig = &info.signature;
        let rc = &sig.ret;
        let ty = rc.ty.clone();
        let mut facts;
        if !(sig.annotated || info.from_model) {
            facts = PlaceFacts::new(Typestate::of(Atom::Initialized), ty.value_range());
            if ty.is_pointer() {
                facts.refs = ReferentSet::of(Loc::Unknown);
            }
        } else {
            let mut ts = if rc.is_owning() {
                Typestate::of(Atom::OwnedValid(ResourceId {
                    site,
                    class: rc.resource_class.clone().unwrap_or_else(|| "resource".to_string()),
                }))
            } else {
                Typestate::of(Atom::Initialized)
            };
            let mut range = rc.ordinary_values();
            let mut refs = ReferentSet::empty();
            if let Some(pt) = ty.pointee() {
                if rc.is_owning() {
                    refs.insert(Loc::Heap(site));
                    let contents = if rc.init == InitMode::MayBeUninit {
                        Atom::Uninitialized
                    } else {
                        Atom::Initialized
                    };
                    st.set(
                        Loc::Heap(site),
                        PlaceFacts::new(Typestate::of(contents), pt.value_range()),
                    );
                } else {
                    refs.insert(Loc::Unknown);
                }
            }
            if let Some(s) = rc.optional {
                ts.insert(Atom::Sentinel(s));
                match sentinel_value(s) {
                    Some(v) => range = range.join(&MultiInterval::singleton(v)),
                    None => refs.insert(Loc::Null),
                }
            }
            if !info.alloc_size_args.is_empty() {
                let zero = info
                    .alloc_size_args
                    .iter()
                    .any(|&i| vals.get(i).is_some_and(|v| v.facts.range.as_singleton() == Some(0)));
                if zero && rc.optional == Some(Sentinel::Null) {
                    ts = Typestate::of(Atom::Sentinel(Sentinel::Null));
                    refs = ReferentSet::of(Loc::Null);
                    st.remove(&Loc::Heap(site));
                } else if let Some(var) = info.alloc_size_args.iter().find_map(|&i| {
                    args.get(i)
                        .and_then(|a| a.value.place())
                        .filter(|p| p.is_var() && !p.global)
                        .map(|p| p.base.clone())
                }) {
                    st.alloc_size.insert(site, SizeDep::Var(var));
                }
            }
            facts = PlaceFacts::new(ts, range);
            facts.refs = refs;
        }
        facts.nominal = NominalTag::of(rc.nominal.clone());
        Value {
            facts,
            src: Vec::new(),
            strong: false,
            konst: false,
            ty,
        }
    }
}
