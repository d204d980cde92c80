//! Places, operands, expressions and assignments.

use super::*;
use crusted::annotations::types::IntKind;
use crusted::frontend::ast::UnaryOp;
use crusted::ir::Instr;

/// An evaluated operand.
#[derive(Clone, Debug)]
pub(crate) struct Ev {
    pub val: Val,
    /// The object the value was read from.
    pub src: Option<Obj>,
    pub strong: bool,
    pub ty: QualType,
}

impl Ev {
    fn new(val: Val, ty: QualType) -> Ev {
        Ev {
            val,
            src: None,
            strong: false,
            ty,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Num {
    Int(i64),
    Real(f64),
    Null,
    Ptr(Obj),
}

pub(crate) struct Located {
    pub obj: Obj,
    pub strong: bool,
    pub touched: Vec<Obj>,
}

fn konst(data: Data) -> Val {
    let mut v = Val::of(data);
    v.konst = true;
    v
}

pub(crate) fn null_value() -> Val {
    let mut v = konst(Data::Ptr(None));
    v.sentinel = Some(Sentinel::Null);
    v
}

/// The integer constant 0 used as a pointer.
pub(crate) fn null_constant(v: Val) -> Val {
    if v.konst && v.data == Data::Int(0) {
        null_value()
    } else {
        v
    }
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

fn root_id(p: &Place) -> Option<&str> {
    (!p.global).then_some(p.base.as_str())
}

fn int_op(op: BinaryOp, a: i64, b: i64) -> Option<i64> {
    use BinaryOp::*;
    Some(match op {
        Mul => a.checked_mul(b)?,
        Div => a.checked_div(b)?,
        Rem => a.checked_rem(b)?,
        Add => a.checked_add(b)?,
        Sub => a.checked_sub(b)?,
        Shl => a.checked_shl(u32::try_from(b).ok()?)?,
        Shr => a.checked_shr(u32::try_from(b).ok()?)?,
        Lt => (a < b) as i64,
        Gt => (a > b) as i64,
        Le => (a <= b) as i64,
        Ge => (a >= b) as i64,
        Eq => (a == b) as i64,
        Ne => (a != b) as i64,
        BitAnd => a & b,
        BitXor => a ^ b,
        BitOr => a | b,
        LogAnd => (a != 0 && b != 0) as i64,
        LogOr => (a != 0 || b != 0) as i64,
    })
}

fn real_op(op: BinaryOp, a: f64, b: f64) -> Option<Num> {
    use BinaryOp::*;
    let t = |c: bool| Some(Num::Int(c as i64));
    match op {
        Mul => Some(Num::Real(a * b)),
        Div if b != 0.0 => Some(Num::Real(a / b)),
        Add => Some(Num::Real(a + b)),
        Sub => Some(Num::Real(a - b)),
        Lt => t(a < b),
        Gt => t(a > b),
        Le => t(a <= b),
        Ge => t(a >= b),
        Eq => t(a == b),
        Ne => t(a != b),
        LogAnd => t(a != 0.0 && b != 0.0),
        LogOr => t(a != 0.0 || b != 0.0),
        _ => None,
    }
}

impl Machine<'_> {
    /// Whether `id` is a local declared as a borrow.
    pub(crate) fn borrow_kind(&self, id: &str) -> Option<RefKind> {
        let local = self.cfg.locals.get(id)?;
        if local.kind != LocalKind::Var {
            return None;
        }
        let pointee = local.ty.pointee()?;
        local.contract.ref_kind.or(pointee.is_const.then_some(RefKind::Shared))
    }

    /// The contents of `obj` without choosing anything.
    pub(crate) fn read_cell(&self, st: &St, obj: &Obj, ty: &QualType) -> Val {
        if let Some(v) = st.cells.get(obj) {
            return v.clone();
        }
        let data = match obj {
            Obj::Field(b, _) => match self.read_cell(st, b, ty).data {
                d @ (Data::Uninit | Data::Finalized | Data::Released) => d,
                _ => self.fresh_lazy(ty),
            },
            _ => self.fresh_lazy(ty),
        };
        let mut v = Val::of(data);
        v.tag = self.tables.nominal_of(ty);
        v
    }

    /// Reads `obj`, fixing a concrete number for untracked contents.
    fn load(&mut self, st: &mut St, obj: &Obj, ty: &QualType) -> R<Val> {
        let mut v = self.read_cell(st, obj, ty);
        if v.data == Data::Blob && ty.is_scalar_number() {
            v.data = self.fresh(ty)?;
            if !obj.opaque() {
                st.cells.insert(obj.clone(), v.clone());
            }
        } else if v.data == Data::Blob && ty.is_pointer() {
            v.data = Data::Ptr(Some(Obj::Unknown));
        }
        Ok(v)
    }

    fn check_readable(&mut self, v: &Val, text: &str, span: Span) {
        match v.data {
            Data::Moved => self.report(Code::UseAfterMove, span, text),
            Data::Released => self.report(Code::UseAfterRelease, span, text),
            Data::Uninit | Data::Finalized => self.report(Code::UninitUse, span, text),
            _ => {}
        }
    }

    fn check_unsafe(&mut self, st: &St, ty: &QualType, whole: &str, span: Span) {
        for k in self.tables.props_of(ty).unsafe_kinds {
            if !st.blocks.iter().any(|(_, n)| *n == k) {
                self.report(Code::UnsafeAccess, span, whole);
            }
        }
    }

    /// Records accesses to objects a declared borrow refers to.
    fn conflicts(&mut self, st: &mut St, root: Option<&str>, touched: &[Obj], write: bool, text: &str, span: Span) {
        let ids: Vec<String> = self.cfg.locals.keys().cloned().collect();
        for b in ids {
            if Some(b.as_str()) == root || self.borrow_kind(&b).is_none() {
                continue;
            }
            let Some(v) = st.cells.get(&Obj::Var(b.clone())) else {
                continue;
            };
            let Some(kind) = v.borrow else {
                continue;
            };
            let Some(t) = v.target() else {
                continue;
            };
            if kind == RefKind::Shared && !write {
                continue;
            }
            if touched.iter().any(|o| o.overlaps(t)) {
                let f = super::finding(Code::ExclViolation, span, text);
                st.waiting.push((b, st.time, f));
            }
        }
    }

    pub(crate) fn locate(&mut self, st: &mut St, p: &Place, write: bool) -> R<Located> {
        let cfg = self.cfg;
        let whole = cfg.place_text(p);
        let mut obj = if p.global {
            Obj::Global(p.base.clone())
        } else {
            Obj::Var(p.base.clone())
        };
        let mut strong = true;
        let mut touched = vec![obj.clone()];
        let last_deref = p.projs.iter().rposition(|x| !matches!(x, Proj::Field(_)));
        for (i, proj) in p.projs.iter().enumerate() {
            let here = &p.tys[i];
            match proj {
                Proj::Field(f) => {
                    self.check_unsafe(st, here, &whole, p.span);
                    if !obj.opaque() {
                        obj = Obj::Field(Box::new(obj), f.clone());
                    }
                }
                Proj::Deref | Proj::Index(_) => {
                    if matches!(here.ty, CType::Array(_)) {
                        strong = false;
                    } else {
                        let text = cfg.place_text(&prefix(p, i));
                        let ptr = self.read_cell(st, &obj, here);
                        self.check_readable(&ptr, &text, p.span);
                        if ptr.sentinel.is_some() {
                            self.report(Code::OptDeref, p.span, &text);
                            return Err(Stop);
                        }
                        if write && Some(i) == last_deref && ptr.borrow == Some(RefKind::Shared) {
                            self.report(Code::ExclViolation, p.span, &whole);
                        }
                        obj = match &ptr.data {
                            Data::Ptr(Some(o)) => o.clone(),
                            _ => Obj::Unknown,
                        };
                        let pointee = &p.tys[i + 1];
                        if !obj.opaque()
                            && self.read_cell(st, &obj, pointee).data == Data::Released
                            && ptr.data != Data::Moved
                        {
                            self.report(Code::UseAfterRelease, p.span, &text);
                        }
                        self.check_unsafe(st, pointee, &whole, p.span);
                    }
                    if let Proj::Index(idx) = proj {
                        strong = false;
                        let v = self.eval_operand(st, idx)?;
                        if v.val.sentinel.is_some() {
                            self.report(Code::OptDeref, p.span, &cfg.operand_text(idx));
                            return Err(Stop);
                        }
                    }
                    touched.push(obj.clone());
                }
            }
        }
        touched.push(obj.clone());
        if obj.opaque() {
            strong = false;
        }
        Ok(Located { obj, strong, touched })
    }

    fn address_of(&mut self, st: &mut St, p: &Place) -> R<Ev> {
        let l = self.locate(st, p, false)?;
        let text = self.cfg.place_text(p);
        self.conflicts(st, root_id(p), &l.touched, false, &text, p.span);
        let pointee = match &p.ty().ty {
            CType::Array(e) => (**e).clone(),
            _ => p.ty().clone(),
        };
        Ok(Ev::new(Val::of(Data::Ptr(Some(l.obj))), QualType::pointer_to(pointee)))
    }

    pub(crate) fn eval_operand(&mut self, st: &mut St, o: &Operand) -> R<Ev> {
        match o {
            Operand::Const(c, _) => Ok(match c {
                Const::Int(v) => Ev::new(konst(Data::Int(*v)), QualType::int(IntKind::Int)),
                Const::Float(v) => Ev::new(konst(Data::Real(*v)), QualType::plain(CType::Double)),
                Const::Null => Ev::new(null_value(), QualType::pointer_to(QualType::plain(CType::Void))),
                Const::Str(_) => Ev::new(
                    konst(Data::Ptr(Some(Obj::Str))),
                    QualType::pointer_to(QualType::int(IntKind::Char).constant()),
                ),
            }),
            Operand::AddrOf(p) => self.address_of(st, p),
            Operand::Copy(p) if matches!(p.ty().ty, CType::Array(_)) => self.address_of(st, p),
            Operand::Copy(p) => {
                let l = self.locate(st, p, false)?;
                let mut v = self.load(st, &l.obj, p.ty())?;
                v.konst = false;
                let text = self.cfg.place_text(p);
                let indirect = p.projs.iter().any(|x| !matches!(x, Proj::Field(_)));
                if !(indirect && v.data == Data::Released) {
                    self.check_readable(&v, &text, p.span);
                }
                let mut touched = l.touched;
                touched.extend(v.target().cloned());
                self.conflicts(st, root_id(p), &touched, false, &text, p.span);
                Ok(Ev {
                    val: v,
                    src: Some(l.obj),
                    strong: l.strong,
                    ty: p.ty().clone(),
                })
            }
        }
    }

    /// The number or address an operand denotes; contents that are not an
    /// ordinary value count as unknown.
    pub(crate) fn operand_num(&mut self, ev: &Ev, _o: &Operand) -> R<Num> {
        Ok(match &ev.val.data {
            Data::Int(v) => Num::Int(*v),
            Data::Real(v) => Num::Real(*v),
            Data::Ptr(None) => Num::Null,
            Data::Ptr(Some(o)) => Num::Ptr(o.clone()),
            _ if ev.ty.is_pointer() => {
                if self.choose(2)? == 0 {
                    Num::Null
                } else {
                    Num::Ptr(Obj::Unknown)
                }
            }
            _ => match self.fresh(&ev.ty)? {
                Data::Int(v) => Num::Int(v),
                Data::Real(v) => Num::Real(v),
                _ => Num::Int(self.pick_int(&IntKind::Int.range())?),
            },
        })
    }

    fn arith(&mut self, op: BinaryOp, x: Num, y: Num) -> R<Option<Num>> {
        use Num::*;
        Ok(match (x, y) {
            (Int(a), Int(b)) => int_op(op, a, b).map(Num::Int),
            (Real(a), Real(b)) => real_op(op, a, b),
            (Real(a), Int(b)) => real_op(op, a, b as f64),
            (Int(a), Real(b)) => real_op(op, a as f64, b),
            (a, b) => {
                let null = |n: &Num| matches!(n, Null | Int(0));
                let same = match (&a, &b) {
                    (a, b) if null(a) && null(b) => Some(true),
                    (a, _) | (_, a) if null(a) => Some(false),
                    (Ptr(p), Ptr(q)) if *p != Obj::Unknown && *q != Obj::Unknown => Some(p == q),
                    _ => None,
                };
                let same = match same {
                    Some(s) => s,
                    None => self.choose(2)? == 0,
                };
                match op {
                    BinaryOp::Eq => Some(Int(same as i64)),
                    BinaryOp::Ne => Some(Int(!same as i64)),
                    _ => None,
                }
            }
        })
    }

    pub(crate) fn compare(&mut self, op: BinaryOp, x: Num, y: Num) -> R<bool> {
        match self.arith(op, x, y)? {
            Some(Num::Int(v)) => Ok(v != 0),
            _ => Ok(self.choose(2)? == 0),
        }
    }

    /// Nominal type of `a op b`, reporting operations the nominal table
    /// does not define.
    pub(crate) fn nominal_binary(&mut self, op: BinaryOp, a: &Val, b: &Val, span: Span) -> Option<String> {
        if a.tag.is_none() && b.tag.is_none()
            || a.tag.as_deref() == Some(UNKNOWN_TAG)
            || b.tag.as_deref() == Some(UNKNOWN_TAG)
        {
            return None;
        }
        if op.is_comparison() || op.is_logical() {
            if let (Some(p), Some(q)) = (&a.tag, &b.tag) {
                if p != q {
                    self.report(Code::NominalOp, span, "");
                }
            }
            return None;
        }
        match self
            .tables
            .nominal
            .binary_result(op.as_str(), a.tag.as_deref(), b.tag.as_deref())
        {
            Some(r) => r,
            None => {
                self.report(Code::NominalOp, span, "");
                Some(UNKNOWN_TAG.to_string())
            }
        }
    }

    fn nominal_unary(&mut self, op: &str, v: &Val, span: Span) -> Option<Option<String>> {
        let Some(n) = v.tag.as_ref().filter(|n| *n != UNKNOWN_TAG) else {
            return Some(None);
        };
        let r = self.tables.nominal.unary_result(op, Some(n));
        if r.is_none() {
            self.report(Code::NominalOp, span, "");
        }
        r
    }

    fn eval_rvalue(&mut self, st: &mut St, r: &Rvalue, span: Span) -> R<Ev> {
        match r {
            Rvalue::Use(o) => self.eval_operand(st, o),
            Rvalue::Binary(op, a, b) => {
                let va = self.eval_operand(st, a)?;
                let vb = self.eval_operand(st, b)?;
                let tag = self.nominal_binary(*op, &va.val, &vb.val, a.span().to(b.span()));
                let cmp = op.is_comparison() || op.is_logical();
                let ty = if cmp {
                    QualType::int(IntKind::Int)
                } else if vb.ty.is_pointer() && !va.ty.is_pointer() {
                    vb.ty.clone()
                } else {
                    va.ty.clone()
                };
                let data = if !cmp && (va.ty.is_pointer() || vb.ty.is_pointer()) {
                    let p = if va.ty.is_pointer() { &va } else { &vb };
                    match &p.val.data {
                        Data::Ptr(Some(o)) if !(va.ty.is_pointer() && vb.ty.is_pointer()) => Data::Ptr(Some(o.clone())),
                        _ => Data::Ptr(Some(Obj::Unknown)),
                    }
                } else {
                    let x = self.operand_num(&va, a)?;
                    let y = self.operand_num(&vb, b)?;
                    match self.arith(*op, x, y)? {
                        Some(Num::Int(v)) => Data::Int(v),
                        Some(Num::Real(v)) => Data::Real(v),
                        _ => self.fresh(&ty)?,
                    }
                };
                let mut v = Val::of(data);
                v.tag = tag;
                v.konst = va.val.konst && vb.val.konst;
                Ok(Ev::new(v, ty))
            }
            Rvalue::Unary(op, o) => {
                let ev = self.eval_operand(st, o)?;
                let tag = self
                    .nominal_unary(op.as_str(), &ev.val, span)
                    .unwrap_or(Some(UNKNOWN_TAG.to_string()));
                let x = self.operand_num(&ev, o)?;
                let data = match (op, x) {
                    (UnaryOp::Neg, Num::Int(v)) => v.checked_neg().map(Data::Int),
                    (UnaryOp::Neg, Num::Real(v)) => Some(Data::Real(-v)),
                    (UnaryOp::Plus, Num::Int(v)) => Some(Data::Int(v)),
                    (UnaryOp::Plus, Num::Real(v)) => Some(Data::Real(v)),
                    (UnaryOp::Not, Num::Int(v)) => Some(Data::Int((v == 0) as i64)),
                    (UnaryOp::Not, Num::Real(v)) => Some(Data::Int((v == 0.0) as i64)),
                    (UnaryOp::Not, Num::Null) => Some(Data::Int(1)),
                    (UnaryOp::Not, Num::Ptr(_)) => Some(Data::Int(0)),
                    (UnaryOp::BitNot, Num::Int(v)) => Some(Data::Int(!v)),
                    _ => None,
                };
                let data = match data {
                    Some(d) => d,
                    None => self.fresh(&ev.ty)?,
                };
                let mut v = Val::of(data);
                v.tag = tag;
                v.konst = ev.val.konst;
                Ok(Ev::new(v, ev.ty))
            }
            Rvalue::Cast {
                operand,
                ty,
                drops_const,
            } => {
                let mut ev = self.eval_operand(st, operand)?;
                if *drops_const {
                    self.report(Code::ConstCast, operand.span(), &self.cfg.operand_text(operand));
                }
                ev.val.tag = match self.tables.nominal_of(ty) {
                    Some(r) => Some(r),
                    None if ty.is_scalar_number() => None,
                    None => ev.val.tag,
                };
                if ty.is_scalar_number() && ty.ty != CType::Double {
                    let range = ty.value_range();
                    match ev.val.data {
                        Data::Int(v) if !range.contains(v) => ev.val.data = self.fresh(ty)?,
                        Data::Real(v) => {
                            let t = v.trunc() as i64;
                            ev.val.data = if range.contains(t) {
                                Data::Int(t)
                            } else {
                                self.fresh(ty)?
                            };
                        }
                        _ => {}
                    }
                }
                if *drops_const && ev.val.borrow == Some(RefKind::Shared) {
                    ev.val.borrow = Some(RefKind::Exclusive);
                }
                ev.ty = ty.clone();
                Ok(ev)
            }
        }
    }

    /// Writes `ev` into `dest`. Returns the destination when it is a single
    /// strongly updated object.
    pub(crate) fn store(&mut self, st: &mut St, dest: &Place, ev: Ev, span: Span) -> R<Option<Obj>> {
        let l = self.locate(st, dest, true)?;
        let text = self.cfg.place_text(dest);
        self.conflicts(st, root_id(dest), &l.touched, true, &text, dest.span);
        let dest_ty = dest.ty();
        let dest_obj = l.strong.then(|| l.obj.clone());
        let mut v = if dest_ty.is_pointer() {
            null_constant(ev.val.clone())
        } else {
            ev.val.clone()
        };
        let borrow = match root_id(dest) {
            Some(id) if dest.is_var() => self.borrow_kind(id),
            _ => None,
        };
        if let Some(k) = borrow {
            let plain = matches!(v.data, Data::Int(_) | Data::Real(_) | Data::Ptr(_) | Data::Blob);
            if v.borrow.is_none() && v.sentinel.is_none() && plain {
                v.borrow = Some(k);
                v.owns = None;
            }
        } else if v.owns.is_some() {
            if let Some(src) = ev.src.as_ref().filter(|s| ev.strong && Some(*s) != dest_obj.as_ref()) {
                let mut old = self.read_cell(st, src, &ev.ty);
                old.data = Data::Moved;
                old.owns = None;
                st.cells.insert(src.clone(), old);
            }
        }
        if let Some(root) = self.tables.nominal_of(dest_ty) {
            let mix = match &v.tag {
                Some(x) => *x != root && x != UNKNOWN_TAG,
                None => !v.konst,
            };
            if mix {
                self.report(Code::NominalMix, span, &text);
            }
            if v.tag.as_deref() != Some(UNKNOWN_TAG) {
                v.tag = Some(root);
            }
        }
        if dest_ty.is_scalar_number() && dest_ty.ty != CType::Double {
            let range = dest_ty.value_range();
            match v.data {
                Data::Int(x) if !range.contains(x) => v.data = self.fresh(dest_ty)?,
                Data::Real(x) => {
                    let t = x.trunc() as i64;
                    v.data = if range.contains(t) {
                        Data::Int(t)
                    } else {
                        self.fresh(dest_ty)?
                    };
                }
                _ => {}
            }
        }
        if let Some(d) = &dest_obj {
            let old = self.read_cell(st, d, dest_ty);
            if let Some(r) = old.owns {
                let elsewhere = st.cells.iter().any(|(o, c)| o != d && c.owns.as_ref() == Some(&r));
                if v.owns.as_ref() != Some(&r) && !elsewhere {
                    self.report(Code::OwnLeak, span, &text);
                }
            }
            st.cells.retain(|o, _| !o.within(d));
            st.cells.insert(d.clone(), v);
        } else if !l.obj.opaque() {
            let old = self.read_cell(st, &l.obj, dest_ty);
            let owns = v.owns.clone().or(old.owns.clone());
            let mut new = match old.data {
                Data::Uninit | Data::Moved | Data::Released | Data::Finalized => old,
                _ => v,
            };
            new.owns = owns;
            st.cells.insert(l.obj.clone(), new);
        }
        Ok(dest_obj)
    }

    pub(crate) fn instr(&mut self, st: &mut St, ins: &Instr) -> R<()> {
        match &ins.kind {
            InstrKind::Declare(id) => {
                let o = Obj::Var(id.clone());
                st.cells.retain(|c, _| !c.within(&o));
                st.cells.insert(o, Val::of(Data::Uninit));
            }
            InstrKind::Assign {
                dest,
                value,
                incdec: Some(op),
            } => {
                let src = Operand::Copy(dest.clone());
                let ev = self.eval_operand(st, &src)?;
                let Some(tag) = self.nominal_unary(op.as_str(), &ev.val, ins.span) else {
                    return Ok(());
                };
                let mut v = if ev.ty.is_pointer() {
                    ev.val.clone()
                } else {
                    let bop = match value {
                        Rvalue::Binary(b, ..) => *b,
                        _ => BinaryOp::Add,
                    };
                    let x = self.operand_num(&ev, &src)?;
                    let data = match self.arith(bop, x, Num::Int(1))? {
                        Some(Num::Int(v)) => Data::Int(v),
                        Some(Num::Real(v)) => Data::Real(v),
                        _ => self.fresh(&ev.ty)?,
                    };
                    Val::of(data)
                };
                v.tag = tag;
                v.konst = false;
                self.store(st, dest, Ev::new(v, ev.ty), ins.span)?;
            }
            InstrKind::Assign { dest, value, .. } => {
                let ev = self.eval_rvalue(st, value, ins.span)?;
                self.store(st, dest, ev, ins.span)?;
            }
            InstrKind::Call {
                dest,
                callee,
                args,
                site,
            } => {
                self.call(st, dest.as_ref(), callee, args, *site, ins.span)?;
            }
            InstrKind::Enter(kind, name) => {
                if *kind == BlockKind::Unchecked && !self.cfg.signature.unsafe_kinds.contains(name) {
                    self.report(Code::UnsafePropagate, ins.span, "");
                }
                st.blocks.push((*kind, name.clone()));
            }
            InstrKind::Exit(kind, name) => {
                if let Some(i) = st.blocks.iter().rposition(|(k, n)| k == kind && n == name) {
                    st.blocks.remove(i);
                }
            }
            InstrKind::ScopeEnd(ids) => {
                let dying: BTreeSet<Obj> = ids.iter().map(|id| Obj::Var(id.clone())).collect();
                let mut leaked: BTreeMap<Res, String> = BTreeMap::new();
                for id in ids {
                    let Some(r) = st.cells.get(&Obj::Var(id.clone())).and_then(|v| v.owns.clone()) else {
                        continue;
                    };
                    let outside = st
                        .cells
                        .iter()
                        .any(|(o, c)| !dying.contains(o.root()) && c.owns.as_ref() == Some(&r));
                    if !outside {
                        leaked.entry(r).or_insert_with(|| id.clone());
                    }
                }
                for id in leaked.into_values() {
                    let name = self.cfg.name_of(&id).to_string();
                    self.report(Code::OwnLeak, ins.span, &name);
                }
                for id in ids {
                    self.check_finalized(st, id, ins.span);
                }
                st.cells.retain(|o, _| !dying.contains(o.root()));
            }
        }
        Ok(())
    }
}
