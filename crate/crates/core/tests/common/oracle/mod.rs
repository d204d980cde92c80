//! Reference checker for loop-free functions.
//!
//! Executes a lowered function concretely along every path. Inputs, call
//! outcomes and untracked memory are drawn from small candidate sets, and
//! each distinct combination of choices is replayed from the start. The
//! checker records every check that fails on at least one execution.

mod call;
mod eval;

use std::collections::{BTreeMap, BTreeSet};

use crusted::annotations::tables::{InitMode, RefKind, Tables};
use crusted::annotations::types::{CType, QualType};
use crusted::annotations::{PropValue, Sentinel};
use crusted::diagnostics::Code;
use crusted::domains::BlockKind;
use crusted::frontend::ast::BinaryOp;
use crusted::ir::{Cfg, Cond, Const, InstrKind, LocalKind, Operand, Place, Proj, Rvalue, Terminator};
use crusted::span::Span;

/// One failed check: code, line, column and the place it names.
pub type Finding = (Code, u32, u32, String);

/// Nominal tag of the result of an operation the nominal table rejects.
pub(crate) const UNKNOWN_TAG: &str = "";

/// Upper bound on replayed executions per function.
pub const MAX_RUNS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Obj {
    Var(String),
    Global(String),
    Target(String),
    Heap(u32),
    Field(Box<Obj>, String),
    Str,
    Unknown,
}

impl Obj {
    fn root(&self) -> &Obj {
        match self {
            Obj::Field(b, _) => b.root(),
            o => o,
        }
    }

    fn opaque(&self) -> bool {
        matches!(self.root(), Obj::Str | Obj::Unknown)
    }

    fn within(&self, o: &Obj) -> bool {
        self == o || matches!(self, Obj::Field(b, _) if b.within(o))
    }

    fn overlaps(&self, o: &Obj) -> bool {
        self.within(o) || o.within(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Data {
    Uninit,
    Int(i64),
    Real(f64),
    /// NULL, or a pointer into an object.
    Ptr(Option<Obj>),
    /// Initialized aggregate.
    Blob,
    Moved,
    Released,
    Finalized,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Res {
    pub site: u32,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Val {
    pub data: Data,
    /// The value is the sentinel of an optional type.
    pub sentinel: Option<Sentinel>,
    pub owns: Option<Res>,
    pub borrow: Option<RefKind>,
    pub tag: Option<String>,
    pub konst: bool,
    /// Property name to value; `None` when the value is not known.
    pub props: BTreeMap<String, Option<String>>,
}

impl Val {
    pub fn of(data: Data) -> Val {
        Val {
            data,
            sentinel: None,
            owns: None,
            borrow: None,
            tag: None,
            konst: false,
            props: BTreeMap::new(),
        }
    }

    /// Holds an ordinary initialized value with no ownership attached.
    fn plain_init(&self) -> bool {
        matches!(self.data, Data::Int(_) | Data::Real(_) | Data::Ptr(_) | Data::Blob)
            && self.owns.is_none()
            && self.borrow.is_none()
            && self.sentinel.is_none()
    }

    fn target(&self) -> Option<&Obj> {
        match &self.data {
            Data::Ptr(Some(o)) if !o.opaque() => Some(o),
            _ => None,
        }
    }

    fn entails(&self, k: &str, v: &PropValue) -> bool {
        match v {
            PropValue::Any => true,
            PropValue::Atom(a) => self.props.get(k) == Some(&Some(a.clone())),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct St {
    pub cells: BTreeMap<Obj, Val>,
    pub blocks: Vec<(BlockKind, String)>,
    pub time: usize,
    /// Conflicts with a borrow that count once the borrower is used again:
    /// borrower, time of the conflict, finding.
    pub waiting: Vec<(String, usize, Finding)>,
}

/// Aborts the current execution.
pub(crate) struct Stop;

pub(crate) type R<T> = Result<T, Stop>;

pub(crate) struct Machine<'a> {
    pub cfg: &'a Cfg,
    pub tables: &'a Tables,
    pub found: BTreeSet<Finding>,
    pool: Vec<i64>,
    reals: Vec<f64>,
    script: Vec<(usize, usize)>,
    pos: usize,
}

fn finding(code: Code, span: Span, place: &str) -> Finding {
    (code, span.line, span.col, place.to_string())
}

fn ints_of(o: &Operand, out: &mut BTreeSet<i64>) {
    match o {
        Operand::Const(Const::Int(v), _) => {
            out.insert(*v);
        }
        Operand::Copy(p) | Operand::AddrOf(p) => {
            for proj in &p.projs {
                if let Proj::Index(i) = proj {
                    ints_of(i, out);
                }
            }
        }
        _ => {}
    }
}

fn operands(r: &Rvalue) -> Vec<&Operand> {
    match r {
        Rvalue::Use(o) | Rvalue::Unary(_, o) | Rvalue::Cast { operand: o, .. } => vec![o],
        Rvalue::Binary(_, a, b) => vec![a, b],
    }
}

fn place_uses(p: &Place, out: &mut BTreeSet<String>) {
    if !p.global {
        out.insert(p.base.clone());
    }
    for proj in &p.projs {
        if let Proj::Index(o) = proj {
            operand_uses(o, out);
        }
    }
}

fn operand_uses(o: &Operand, out: &mut BTreeSet<String>) {
    if let Operand::Copy(p) | Operand::AddrOf(p) = o {
        place_uses(p, out);
    }
}

/// Locals read by an instruction and locals it overwrites as a whole.
fn uses_defs(kind: &InstrKind) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut uses = BTreeSet::new();
    let mut defs = BTreeSet::new();
    let mut dest = |d: &Place, uses: &mut BTreeSet<String>| {
        if d.is_var() {
            if !d.global {
                defs.insert(d.base.clone());
            }
        } else {
            place_uses(d, uses);
        }
    };
    match kind {
        InstrKind::Declare(id) => {
            defs.insert(id.clone());
        }
        InstrKind::Assign { dest: d, value, .. } => {
            operands(value).into_iter().for_each(|o| operand_uses(o, &mut uses));
            dest(d, &mut uses);
        }
        InstrKind::Call { dest: d, args, .. } => {
            args.iter().for_each(|a| operand_uses(&a.value, &mut uses));
            if let Some(d) = d {
                dest(d, &mut uses);
            }
        }
        _ => {}
    }
    (uses, defs)
}

fn term_uses(t: &Terminator) -> BTreeSet<String> {
    let mut uses = BTreeSet::new();
    match t {
        Terminator::Branch {
            cond: Cond::Compare(_, a, b),
            ..
        } => {
            operand_uses(a, &mut uses);
            operand_uses(b, &mut uses);
        }
        Terminator::Branch {
            cond: Cond::Truthy(a), ..
        } => operand_uses(a, &mut uses),
        Terminator::Return { value: Some(v), .. } => operand_uses(v, &mut uses),
        _ => {}
    }
    uses
}

impl<'a> Machine<'a> {
    fn new(cfg: &'a Cfg, tables: &'a Tables) -> Self {
        let mut consts = BTreeSet::from([-1, 0, 1]);
        let mut reals = vec![-1.0, 0.0, 1.0];
        for b in &cfg.blocks {
            for ins in &b.instrs {
                match &ins.kind {
                    InstrKind::Assign { value, .. } => {
                        for o in operands(value) {
                            ints_of(o, &mut consts);
                            if let Operand::Const(Const::Float(f), _) = o {
                                reals.push(*f);
                            }
                        }
                    }
                    InstrKind::Call { args, .. } => args.iter().for_each(|a| ints_of(&a.value, &mut consts)),
                    _ => {}
                }
            }
            match &b.term {
                Terminator::Branch {
                    cond: Cond::Compare(_, a, c),
                    ..
                } => {
                    ints_of(a, &mut consts);
                    ints_of(c, &mut consts);
                    for o in [a, c] {
                        if let Operand::Const(Const::Float(f), _) = o {
                            reals.extend([f - 1.0, *f, f + 1.0]);
                        }
                    }
                }
                Terminator::Return { value: Some(v), .. } => ints_of(v, &mut consts),
                _ => {}
            }
        }
        let mut pool = BTreeSet::new();
        for c in consts {
            pool.extend([c.saturating_sub(1), c, c.saturating_add(1)]);
        }
        reals.extend(pool.iter().map(|v| *v as f64));
        reals.sort_by(f64::total_cmp);
        reals.dedup();
        Machine {
            cfg,
            tables,
            found: BTreeSet::new(),
            pool: pool.into_iter().collect(),
            reals,
            script: Vec::new(),
            pos: 0,
        }
    }

    /// Picks one of `n` alternatives; every alternative is eventually
    /// taken by some execution.
    pub(crate) fn choose(&mut self, n: usize) -> R<usize> {
        if n == 0 {
            return Err(Stop);
        }
        if self.pos < self.script.len() {
            let c = self.script[self.pos].0;
            self.pos += 1;
            return Ok(c);
        }
        self.script.push((0, n));
        self.pos += 1;
        Ok(0)
    }

    /// Advances to the next untried combination of choices.
    fn next_script(&mut self) -> bool {
        while let Some((c, n)) = self.script.pop() {
            if c + 1 < n {
                self.script.push((c + 1, n));
                return true;
            }
        }
        false
    }

    pub(crate) fn report(&mut self, code: Code, span: Span, place: &str) {
        self.found.insert(finding(code, span, place));
    }

    /// Candidate values inside `allowed`.
    pub(crate) fn candidates(&self, allowed: &crusted::domains::MultiInterval) -> Vec<i64> {
        let mut out: BTreeSet<i64> = self.pool.iter().copied().filter(|v| allowed.contains(*v)).collect();
        for &(lo, hi) in allowed.intervals() {
            for v in [lo, hi] {
                if v != i64::MIN && v != i64::MAX {
                    out.insert(v);
                }
            }
            if out.is_empty() {
                out.insert(if lo == i64::MIN { hi } else { lo });
            }
        }
        out.into_iter().collect()
    }

    pub(crate) fn pick_int(&mut self, allowed: &crusted::domains::MultiInterval) -> R<i64> {
        let c = self.candidates(allowed);
        let i = self.choose(c.len())?;
        Ok(c[i])
    }

    /// A value of type `ty` about which nothing is known.
    pub(crate) fn fresh(&mut self, ty: &QualType) -> R<Data> {
        Ok(match &ty.ty {
            CType::Int(_) | CType::Enum(_) => Data::Int(self.pick_int(&ty.value_range())?),
            CType::Double => {
                let i = self.choose(self.reals.len())?;
                Data::Real(self.reals[i])
            }
            CType::Pointer(_) | CType::Array(_) => Data::Ptr(Some(Obj::Unknown)),
            _ => Data::Blob,
        })
    }

    pub(crate) fn obj_text(&self, o: &Obj) -> String {
        match o {
            Obj::Var(id) => self.cfg.name_of(id).to_string(),
            Obj::Field(b, f) => format!("{}.{f}", self.obj_text(b)),
            Obj::Target(p) => format!("*{}", self.cfg.name_of(p)),
            Obj::Global(g) => g.clone(),
            other => format!("{other:?}"),
        }
    }

    fn entry(&mut self) -> R<St> {
        let cfg = self.cfg;
        let mut st = St::default();
        for (i, id) in cfg.params.iter().enumerate() {
            let local = &cfg.locals[id];
            let c = &local.contract;
            let sentinel = match c.optional {
                Some(_) => self.choose(2)? == 0,
                None => false,
            };
            let mut v = Val::of(Data::Blob);
            v.tag = c.nominal.clone();
            if sentinel {
                v.sentinel = c.optional;
                v.data = match c.optional {
                    Some(Sentinel::Int(s)) => Data::Int(s),
                    _ => Data::Ptr(None),
                };
            } else {
                if c.is_owning() {
                    v.owns = Some(Res {
                        site: cfg.sites + i as u32,
                        class: c.resource_class.clone().unwrap_or_else(|| "resource".to_string()),
                    });
                } else if local.ty.is_pointer() {
                    v.borrow = c.ref_kind;
                }
                v.data = if local.ty.is_pointer() {
                    Data::Ptr(Some(Obj::Target(id.clone())))
                } else if local.ty.is_scalar_number() && local.ty.ty != CType::Double {
                    Data::Int(self.pick_int(&c.ordinary_values())?)
                } else {
                    self.fresh(&local.ty)?
                };
            }
            let props: BTreeMap<String, Option<String>> = c
                .in_props
                .iter()
                .map(|(k, p)| {
                    let a = match p {
                        PropValue::Atom(a) => Some(a.clone()),
                        PropValue::Any => None,
                    };
                    (k.clone(), a)
                })
                .collect();
            if let Some(pointee) = local.ty.pointee() {
                let mut t = Val::of(match c.init {
                    InitMode::RequiresInit => self.fresh_lazy(pointee),
                    _ => Data::Uninit,
                });
                t.props = props;
                st.cells.insert(Obj::Target(id.clone()), t);
            } else {
                v.props = props;
            }
            st.cells.insert(Obj::Var(id.clone()), v);
        }
        Ok(st)
    }

    /// Initialized contents chosen on first read.
    pub(crate) fn fresh_lazy(&self, ty: &QualType) -> Data {
        match &ty.ty {
            CType::Pointer(_) | CType::Array(_) => Data::Ptr(Some(Obj::Unknown)),
            _ => Data::Blob,
        }
    }

    /// Confirms waiting conflicts whose borrower is used at the current
    /// time and forgets those whose borrower is overwritten.
    fn liveness_step(&mut self, st: &mut St, uses: &BTreeSet<String>, defs: &BTreeSet<String>) {
        let now = st.time;
        let mut keep = Vec::new();
        for (b, t, f) in std::mem::take(&mut st.waiting) {
            if t < now && uses.contains(&b) {
                self.found.insert(f);
            } else if !(t < now && defs.contains(&b)) {
                keep.push((b, t, f));
            }
        }
        st.waiting = keep;
    }

    fn execute(&mut self) -> R<()> {
        let cfg = self.cfg;
        let mut st = self.entry()?;
        let mut b = cfg.entry;
        loop {
            let block = &cfg.blocks[b];
            for ins in &block.instrs {
                st.time += 1;
                let (uses, defs) = uses_defs(&ins.kind);
                self.liveness_step(&mut st, &uses, &defs);
                self.instr(&mut st, ins)?;
            }
            st.time += 1;
            self.liveness_step(&mut st, &term_uses(&block.term), &BTreeSet::new());
            match &block.term {
                Terminator::Goto(t) => b = *t,
                Terminator::Branch { cond, then, els, .. } => {
                    b = if self.branch(&mut st, cond)? { *then } else { *els };
                }
                Terminator::Return { value, span, .. } => {
                    self.on_return(&mut st, value.as_ref(), *span)?;
                    return Ok(());
                }
                Terminator::Exit => return Ok(()),
            }
        }
    }

    fn branch(&mut self, st: &mut St, cond: &Cond) -> R<bool> {
        match cond {
            Cond::Compare(op, a, b) => {
                let va = self.eval_operand(st, a)?;
                let vb = self.eval_operand(st, b)?;
                self.nominal_binary(*op, &va.val, &vb.val, a.span().to(b.span()));
                let (x, y) = (self.operand_num(&va, a)?, self.operand_num(&vb, b)?);
                self.compare(*op, x, y)
            }
            Cond::Truthy(a) => {
                let va = self.eval_operand(st, a)?;
                let x = self.operand_num(&va, a)?;
                self.compare(BinaryOp::Ne, x, eval::Num::Int(0))
            }
        }
    }

    fn on_return(&mut self, st: &mut St, value: Option<&Operand>, span: Span) -> R<()> {
        let cfg = self.cfg;
        let rc = &cfg.signature.ret;
        let mut returned = None;
        if let Some(o) = value {
            let ev = self.eval_operand(st, o)?;
            let v = if rc.ty.is_pointer() {
                eval::null_constant(ev.val)
            } else {
                ev.val
            };
            if v.sentinel.is_some() && rc.optional.is_none() {
                self.report(Code::OptRet, span, "");
            }
            if let Some(expected) = rc.value.as_ref().filter(|_| rc.ty.is_scalar_number()) {
                let range = rc.ty.value_range();
                let mut actual = match v.data {
                    Data::Int(x) => range.meet(&crusted::domains::MultiInterval::singleton(x)),
                    Data::Real(x) => range.meet(&crusted::domains::MultiInterval::from_real(x, x)),
                    _ => range,
                };
                if let Some(Sentinel::Int(s)) = rc.optional {
                    actual = actual.without(s);
                }
                if !actual.is_bottom() && !actual.is_subset(expected) {
                    self.report(Code::ValRange, span, "");
                }
            }
            if rc.is_owning() {
                returned = v.owns.clone();
            }
        }
        let mut holders: BTreeMap<Res, (bool, Obj)> = BTreeMap::new();
        for (o, v) in &st.cells {
            let Obj::Var(id) = o.root() else {
                continue;
            };
            let Some(r) = v.owns.clone().filter(|r| Some(r) != returned.as_ref()) else {
                continue;
            };
            let temp = cfg.locals.get(id).is_none_or(|l| l.kind == LocalKind::Temp);
            let key = (temp, o.clone());
            holders
                .entry(r)
                .and_modify(|k| {
                    if key < *k {
                        *k = key.clone();
                    }
                })
                .or_insert(key);
        }
        for (_, (_, o)) in holders {
            let t = self.obj_text(&o);
            self.report(Code::OwnLeak, span, &t);
        }
        let vars: Vec<String> = cfg
            .locals
            .iter()
            .filter(|(_, l)| l.kind == LocalKind::Var)
            .map(|(id, _)| id.clone())
            .collect();
        for id in vars {
            self.check_finalized(st, &id, span);
        }
        for id in &cfg.params {
            let local = &cfg.locals[id];
            let c = &local.contract;
            let target = if local.ty.is_pointer() {
                Obj::Target(id.clone())
            } else {
                Obj::Var(id.clone())
            };
            let v = st.cells.get(&target).cloned().unwrap_or_else(|| Val::of(Data::Blob));
            let mut bad = c.out_props.iter().any(|(k, p)| !v.entails(k, p));
            for (k, p) in &c.in_props {
                if !c.out_props.contains_key(k) && matches!(p, PropValue::Atom(_)) && !v.entails(k, p) {
                    bad = true;
                }
            }
            if bad {
                self.report(Code::PostViolation, span, &local.name);
            }
        }
        Ok(())
    }

    pub(crate) fn check_finalized(&mut self, st: &St, id: &str, span: Span) {
        let Some(local) = self.cfg.locals.get(id) else {
            return;
        };
        if local.kind != LocalKind::Var || !self.tables.props_of(&local.ty).fini_required {
            return;
        }
        if st.cells.get(&Obj::Var(id.to_string())).is_some_and(Val::plain_init) {
            self.report(Code::FiniMissing, span, &local.name);
        }
    }
}

/// Every finding of the reference checker for `cfg`, or `None` when the
/// function has loops or too many executions to enumerate.
pub fn check(cfg: &Cfg, tables: &Tables) -> Option<BTreeSet<Finding>> {
    if cfg.has_loops() {
        return None;
    }
    let mut m = Machine::new(cfg, tables);
    for _ in 0..MAX_RUNS {
        m.pos = 0;
        let _ = m.execute();
        m.script.truncate(m.pos);
        if !m.next_script() {
            return Some(m.found);
        }
    }
    None
}
