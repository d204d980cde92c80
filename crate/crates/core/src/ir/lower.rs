//! Lowering of function bodies to control-flow graphs.

use std::collections::BTreeMap;

use super::*;
use crate::annotations::tables::{Contract, Tables};
use crate::annotations::types::{CType, IntKind, QualType};
use crate::annotations::{AnnotationKind, Site};
use crate::diagnostics::{Code, Diagnostic};
use crate::frontend::ast::*;
use crate::frontend::{named_constant, NamedConstant};

struct Lowerer<'t> {
    tables: &'t Tables,
    locals: BTreeMap<String, Local>,
    scopes: Vec<Vec<(String, String)>>,
    blocks: Vec<BasicBlock>,
    cur: Option<BlockId>,
    exit: BlockId,
    diags: Vec<Diagnostic>,
    temps: usize,
    sites: u32,
    name_uses: BTreeMap<String, usize>,
}

fn int_ty() -> QualType {
    QualType::int(IntKind::Int)
}

/// Type of an incomplete struct's member: nothing is known about it.
fn opaque_member_ty() -> QualType {
    QualType::int(IntKind::Long)
}

fn decay(q: &QualType) -> QualType {
    match &q.ty {
        CType::Array(e) => QualType::pointer_to((**e).clone()),
        _ => QualType {
            typedef: None,
            ..q.clone()
        },
    }
}

fn binary_type(op: BinaryOp, a: &QualType, b: &QualType) -> QualType {
    use BinaryOp::*;
    if op.is_comparison() || op.is_logical() {
        return int_ty();
    }
    let (a, b) = (decay(a), decay(b));
    match (&a.ty, &b.ty) {
        (CType::Pointer(_), CType::Pointer(_)) if op == Sub => QualType::int(IntKind::Long),
        (CType::Pointer(_), _) if matches!(op, Add | Sub) => a,
        (_, CType::Pointer(_)) if op == Add => b,
        (CType::Double, _) | (_, CType::Double) => QualType::plain(CType::Double),
        (CType::Int(x), CType::Int(y)) => {
            let k = (*x).max(*y).max(IntKind::Int);
            QualType::int(k)
        }
        _ => int_ty(),
    }
}

fn drops_const(from: &QualType, to: &QualType) -> bool {
    match (from.pointee(), to.pointee()) {
        (Some(f), Some(t)) => f.is_const && !t.is_const,
        _ => false,
    }
}

impl<'t> Lowerer<'t> {
    fn new(tables: &'t Tables) -> Self {
        let mut l = Lowerer {
            tables,
            locals: BTreeMap::new(),
            scopes: vec![Vec::new()],
            blocks: Vec::new(),
            cur: None,
            exit: 0,
            diags: Vec::new(),
            temps: 0,
            sites: 0,
            name_uses: BTreeMap::new(),
        };
        let entry = l.new_block();
        l.exit = l.new_block();
        l.blocks[l.exit].term = Terminator::Exit;
        l.cur = Some(entry);
        l
    }

    fn new_block(&mut self) -> BlockId {
        self.blocks.push(BasicBlock {
            instrs: Vec::new(),
            term: Terminator::Exit,
        });
        self.blocks.len() - 1
    }

    /// The current block, or a fresh detached one if the position is dead.
    fn block(&mut self) -> BlockId {
        match self.cur {
            Some(b) => b,
            None => {
                let b = self.new_block();
                self.cur = Some(b);
                b
            }
        }
    }

    fn emit(&mut self, kind: InstrKind, span: Span) {
        let b = self.block();
        self.blocks[b].instrs.push(Instr { kind, span });
    }

    fn terminate(&mut self, t: Terminator) {
        let b = self.block();
        self.blocks[b].term = t;
        self.cur = None;
    }

    fn goto(&mut self, target: BlockId) {
        if self.cur.is_some() {
            self.terminate(Terminator::Goto(target));
        }
    }

    fn err(&mut self, code: Code, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::detail(code, span, msg));
    }

    // ---- locals -----------------------------------------------------------

    fn declare(&mut self, name: &str, ty: QualType, contract: Contract, kind: LocalKind, span: Span) -> String {
        let n = self.name_uses.entry(name.to_string()).or_insert(0);
        let id = if *n == 0 {
            name.to_string()
        } else {
            format!("{name}'{n}")
        };
        *n += 1;
        self.locals.insert(
            id.clone(),
            Local {
                id: id.clone(),
                name: name.to_string(),
                ty,
                contract,
                kind,
                span,
            },
        );
        self.scopes
            .last_mut()
            .expect("scope")
            .push((name.to_string(), id.clone()));
        id
    }

    fn temp(&mut self, ty: QualType, span: Span) -> Place {
        let name = format!("%{}", self.temps);
        self.temps += 1;
        let ty = QualType { typedef: None, ..ty };
        self.locals.insert(
            name.clone(),
            Local {
                id: name.clone(),
                name: name.clone(),
                ty: ty.clone(),
                contract: Contract::of_type(ty.clone()),
                kind: LocalKind::Temp,
                span,
            },
        );
        Place::local(&name, ty, span)
    }

    fn lookup(&self, name: &str) -> Option<&String> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, id)| id)
    }

    // ---- types ------------------------------------------------------------

    fn operand_type(&self, op: &Operand) -> QualType {
        match op {
            Operand::Copy(p) => p.ty().clone(),
            Operand::AddrOf(p) => QualType::pointer_to(p.ty().clone()),
            Operand::Const(c, _) => match c {
                Const::Int(_) => int_ty(),
                Const::Float(_) => QualType::plain(CType::Double),
                Const::Null => QualType::pointer_to(QualType::plain(CType::Void)),
                Const::Str(_) => QualType::pointer_to(QualType::int(IntKind::Char).constant()),
            },
        }
    }

    fn rvalue_type(&self, r: &Rvalue) -> QualType {
        match r {
            Rvalue::Use(o) => self.operand_type(o),
            Rvalue::Binary(op, a, b) => binary_type(*op, &self.operand_type(a), &self.operand_type(b)),
            Rvalue::Unary(UnaryOp::Not, _) => int_ty(),
            Rvalue::Unary(_, o) => decay(&self.operand_type(o)),
            Rvalue::Cast { ty, .. } => ty.clone(),
        }
    }

    fn member_type(&mut self, base: &QualType, field: &Ident) -> QualType {
        let CType::Struct(tag) = &base.ty else {
            self.err(
                Code::Parse,
                field.span,
                format!("member reference base type '{base}' is not a structure"),
            );
            return opaque_member_ty();
        };
        match self.tables.structs.get(tag) {
            None => opaque_member_ty(),
            Some(info) => match info.members.iter().find(|(n, _)| *n == field.name) {
                Some((_, c)) => c.ty.clone(),
                None => {
                    self.err(
                        Code::Parse,
                        field.span,
                        format!("no member named '{}' in '{base}'", field.name),
                    );
                    opaque_member_ty()
                }
            },
        }
    }

    // ---- expressions --------------------------------------------------------

    fn ident_operand(&mut self, name: &str, span: Span) -> Operand {
        if let Some(id) = self.lookup(name).cloned() {
            let ty = self.locals[&id].ty.clone();
            return Operand::Copy(Place::local(&id, ty, span));
        }
        if let Some(ty) = self.tables.globals.get(name) {
            return Operand::Copy(Place {
                base: name.to_string(),
                global: true,
                projs: Vec::new(),
                tys: vec![ty.clone()],
                span,
            });
        }
        if let Some(v) = self.tables.enum_consts.get(name) {
            return Operand::Const(Const::Int(*v), span);
        }
        match named_constant(name) {
            Some(NamedConstant::Null) => return Operand::Const(Const::Null, span),
            Some(NamedConstant::Int(v)) => return Operand::Const(Const::Int(v), span),
            None => {}
        }
        if self.tables.functions.contains_key(name) {
            self.err(Code::Lower, span, format!("function '{name}' used as a value"));
        } else {
            self.err(Code::Parse, span, format!("use of undeclared identifier '{name}'"));
        }
        Operand::Const(Const::Int(0), span)
    }

    /// Lowers an lvalue expression to a place.
    fn place(&mut self, e: &Expr) -> Option<Place> {
        match &e.kind {
            ExprKind::Paren(inner) => self.place(inner).map(|mut p| {
                p.span = e.span;
                p
            }),
            ExprKind::Ident(name) => {
                let before = self.diags.len();
                match self.ident_operand(name, e.span) {
                    Operand::Copy(p) => Some(p),
                    _ => {
                        if self.diags.len() == before {
                            self.err(Code::Lower, e.span, "expression is not assignable");
                        }
                        None
                    }
                }
            }
            ExprKind::Unary {
                op: UnaryOp::Deref,
                operand,
            } => {
                let mut p = self.pointer_place(operand)?;
                let Some(pointee) = p.ty().pointee().cloned() else {
                    self.err(
                        Code::Parse,
                        e.span,
                        format!("indirection requires pointer operand ('{}' invalid)", p.ty()),
                    );
                    return None;
                };
                p.push(Proj::Deref, pointee);
                p.span = e.span;
                Some(p)
            }
            ExprKind::Index { base, index } => {
                let mut p = self.pointer_place(base)?;
                let idx = self.operand(index);
                let Some(elem) = p.ty().pointee().cloned() else {
                    self.err(
                        Code::Parse,
                        e.span,
                        format!("subscripted value of type '{}' is not an array or pointer", p.ty()),
                    );
                    return None;
                };
                p.push(Proj::Index(idx), elem);
                p.span = e.span;
                Some(p)
            }
            ExprKind::Member { base, field, arrow } => {
                let mut p = if *arrow {
                    let mut p = self.pointer_place(base)?;
                    let Some(pointee) = p.ty().pointee().cloned() else {
                        self.err(
                            Code::Parse,
                            e.span,
                            format!("member reference type '{}' is not a pointer", p.ty()),
                        );
                        return None;
                    };
                    p.push(Proj::Deref, pointee);
                    p
                } else {
                    self.place(base)?
                };
                let ty = self.member_type(&p.ty().clone(), field);
                p.push(Proj::Field(field.name.clone()), ty);
                p.span = e.span;
                Some(p)
            }
            _ => {
                self.err(Code::Lower, e.span, "expression is not assignable");
                None
            }
        }
    }

    /// A place holding the pointer value of `e`, using a temporary when `e`
    /// is not itself a place.
    fn pointer_place(&mut self, e: &Expr) -> Option<Place> {
        match &e.unparen().kind {
            ExprKind::Ident(_) | ExprKind::Member { .. } | ExprKind::Index { .. } => self.place(e),
            ExprKind::Unary { op: UnaryOp::Deref, .. } => self.place(e),
            _ => {
                let op = self.operand(e);
                match op {
                    Operand::Copy(p) => Some(p),
                    other => {
                        let ty = self.operand_type(&other);
                        let t = self.temp(ty, e.span);
                        self.emit(
                            InstrKind::Assign {
                                dest: t.clone(),
                                value: Rvalue::Use(other),
                                incdec: None,
                            },
                            e.span,
                        );
                        Some(t)
                    }
                }
            }
        }
    }

    fn materialize(&mut self, value: Rvalue, span: Span) -> Operand {
        let ty = self.rvalue_type(&value);
        let t = self.temp(ty, span);
        self.emit(
            InstrKind::Assign {
                dest: t.clone(),
                value,
                incdec: None,
            },
            span,
        );
        Operand::Copy(t)
    }

    fn incdec(&mut self, op: UnaryOp, target: &Expr, span: Span) -> Option<Place> {
        let p = self.place(target)?;
        let bop = match op {
            UnaryOp::PreInc | UnaryOp::PostInc => BinaryOp::Add,
            _ => BinaryOp::Sub,
        };
        self.emit(
            InstrKind::Assign {
                dest: p.clone(),
                value: Rvalue::Binary(bop, Operand::Copy(p.clone()), Operand::Const(Const::Int(1), span)),
                incdec: Some(op),
            },
            span,
        );
        Some(p)
    }

    fn call(&mut self, callee: &Ident, args: &[Expr], dest: Option<Place>, span: Span) -> Option<QualType> {
        let sig = match self.tables.function(&callee.name) {
            Some(f) => f.signature.clone(),
            None => {
                let what = if self.lookup(&callee.name).is_some() {
                    format!("called object '{}' is not a function", callee.name)
                } else {
                    format!("implicit declaration of function '{}'", callee.name)
                };
                self.err(Code::Parse, callee.span, what);
                for a in args {
                    self.operand(a);
                }
                return None;
            }
        };
        if !sig.params.is_empty() && sig.params.len() != args.len() {
            self.err(
                Code::Lower,
                span,
                format!(
                    "'{}' expects {} argument(s), {} given",
                    callee.name,
                    sig.params.len(),
                    args.len()
                ),
            );
        }
        let mut lowered = Vec::new();
        for a in args {
            let value = self.operand(a);
            lowered.push(Arg { value, span: a.span });
        }
        let site = self.sites;
        self.sites += 1;
        self.emit(
            InstrKind::Call {
                dest,
                callee: callee.name.clone(),
                args: lowered,
                site,
            },
            span,
        );
        Some(sig.ret.ty.clone())
    }

    /// Lowers `e` for its value.
    fn operand(&mut self, e: &Expr) -> Operand {
        match &e.kind {
            ExprKind::Paren(inner) => self.operand(inner),
            ExprKind::Ident(name) => self.ident_operand(name, e.span),
            ExprKind::IntLit { value, .. } | ExprKind::CharLit { value, .. } => {
                Operand::Const(Const::Int(*value), e.span)
            }
            ExprKind::FloatLit { value, .. } => Operand::Const(Const::Float(*value), e.span),
            ExprKind::StrLit(s) => Operand::Const(Const::Str(s.clone()), e.span),
            ExprKind::Unary {
                op: UnaryOp::Neg,
                operand,
            } if matches!(
                operand.unparen().kind,
                ExprKind::IntLit { .. } | ExprKind::CharLit { .. } | ExprKind::FloatLit { .. }
            ) =>
            {
                match self.operand(operand) {
                    Operand::Const(Const::Int(v), _) => Operand::Const(Const::Int(-v), e.span),
                    Operand::Const(Const::Float(v), _) => Operand::Const(Const::Float(-v), e.span),
                    other => other,
                }
            }
            ExprKind::Unary {
                op: UnaryOp::AddrOf,
                operand,
            } => match self.place(operand) {
                Some(mut p) => {
                    p.span = e.span;
                    Operand::AddrOf(p)
                }
                None => Operand::Const(Const::Int(0), e.span),
            },
            ExprKind::Unary { op: UnaryOp::Deref, .. } | ExprKind::Index { .. } | ExprKind::Member { .. } => {
                match self.place(e) {
                    Some(p) => Operand::Copy(p),
                    None => Operand::Const(Const::Int(0), e.span),
                }
            }
            ExprKind::Unary {
                op: op @ (UnaryOp::PreInc | UnaryOp::PreDec),
                operand,
            } => match self.incdec(*op, operand, e.span) {
                Some(p) => Operand::Copy(p),
                None => Operand::Const(Const::Int(0), e.span),
            },
            ExprKind::Unary {
                op: op @ (UnaryOp::PostInc | UnaryOp::PostDec),
                operand,
            } => {
                let Some(p) = self.place(operand) else {
                    return Operand::Const(Const::Int(0), e.span);
                };
                let old = self.materialize(Rvalue::Use(Operand::Copy(p)), e.span);
                self.incdec(*op, operand, e.span);
                old
            }
            ExprKind::Assign { lhs, rhs } => match self.assign(lhs, rhs, e.span) {
                Some(p) => Operand::Copy(p),
                None => Operand::Const(Const::Int(0), e.span),
            },
            ExprKind::Call { callee, args } => {
                let ret = match self.tables.function(&callee.name) {
                    Some(f) => f.signature.ret.ty.clone(),
                    None => int_ty(),
                };
                if ret.ty == CType::Void {
                    self.call(callee, args, None, e.span);
                    self.err(Code::Lower, e.span, "void value used in an expression");
                    return Operand::Const(Const::Int(0), e.span);
                }
                let t = self.temp(ret, e.span);
                self.call(callee, args, Some(t.clone()), e.span);
                Operand::Copy(t)
            }
            ExprKind::Binary { op, .. } if op.is_logical() => {
                let t = self.temp(int_ty(), e.span);
                let (tb, fb, join) = (self.new_block(), self.new_block(), self.new_block());
                self.cond(e, tb, fb);
                for (b, v) in [(tb, 1), (fb, 0)] {
                    self.cur = Some(b);
                    self.emit(
                        InstrKind::Assign {
                            dest: t.clone(),
                            value: Rvalue::Use(Operand::Const(Const::Int(v), e.span)),
                            incdec: None,
                        },
                        e.span,
                    );
                    self.goto(join);
                }
                self.cur = Some(join);
                Operand::Copy(t)
            }
            ExprKind::Binary { .. } | ExprKind::Unary { .. } | ExprKind::Cast { .. } => {
                let r = self.rvalue(e);
                self.materialize(r, e.span)
            }
        }
    }

    fn rvalue(&mut self, e: &Expr) -> Rvalue {
        match &e.kind {
            ExprKind::Paren(inner) => self.rvalue(inner),
            ExprKind::Binary { op, lhs, rhs } if !op.is_logical() => {
                let a = self.operand(lhs);
                let b = self.operand(rhs);
                Rvalue::Binary(*op, a, b)
            }
            ExprKind::Unary {
                op: op @ (UnaryOp::Neg | UnaryOp::Plus | UnaryOp::Not | UnaryOp::BitNot),
                operand,
            } if !(*op == UnaryOp::Neg
                && matches!(
                    operand.unparen().kind,
                    ExprKind::IntLit { .. } | ExprKind::CharLit { .. } | ExprKind::FloatLit { .. }
                )) =>
            {
                let o = self.operand(operand);
                Rvalue::Unary(*op, o)
            }
            ExprKind::Cast { ty, expr } => {
                let mut diags = Vec::new();
                let target = self.tables.type_name(ty, &mut diags);
                self.diags.extend(diags);
                let operand = self.operand(expr);
                let from = self.operand_type(&operand);
                Rvalue::Cast {
                    drops_const: drops_const(&from, &target),
                    operand,
                    ty: target,
                }
            }
            _ => Rvalue::Use(self.operand(e)),
        }
    }

    /// Lowers `e` into `dest`.
    fn store(&mut self, dest: Place, e: &Expr, span: Span) {
        match &e.unparen().kind {
            ExprKind::Call { callee, args } => {
                let returns_void = self
                    .tables
                    .function(&callee.name)
                    .is_some_and(|f| f.signature.ret.ty.ty == CType::Void);
                if returns_void {
                    self.call(callee, args, None, e.span);
                    self.err(Code::Lower, e.span, "void value used in an expression");
                } else {
                    self.call(callee, args, Some(dest), e.span);
                }
            }
            _ => {
                let value = self.rvalue(e);
                self.emit(
                    InstrKind::Assign {
                        dest,
                        value,
                        incdec: None,
                    },
                    span,
                );
            }
        }
    }

    fn assign(&mut self, lhs: &Expr, rhs: &Expr, span: Span) -> Option<Place> {
        let Some(dest) = self.place(lhs) else {
            self.operand(rhs);
            return None;
        };
        self.store(dest.clone(), rhs, span);
        Some(dest)
    }

    /// Lowers `e` for its side effects only.
    fn effect(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Paren(inner) => self.effect(inner),
            ExprKind::Assign { lhs, rhs } => {
                self.assign(lhs, rhs, e.span);
            }
            ExprKind::Call { callee, args } => {
                self.call(callee, args, None, e.span);
            }
            ExprKind::Cast { ty, expr } if ty.pointers.is_empty() && is_void_type(ty) => self.effect(expr),
            ExprKind::Unary {
                op: op @ (UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec),
                operand,
            } => {
                self.incdec(*op, operand, e.span);
            }
            _ => {
                self.operand(e);
            }
        }
    }

    /// Lowers a branch condition; leaves no current block.
    fn cond(&mut self, e: &Expr, then: BlockId, els: BlockId) {
        match &e.kind {
            ExprKind::Paren(inner) => self.cond(inner, then, els),
            ExprKind::Unary {
                op: UnaryOp::Not,
                operand,
            } => self.cond(operand, els, then),
            ExprKind::Binary {
                op: BinaryOp::LogAnd,
                lhs,
                rhs,
            } => {
                let mid = self.new_block();
                self.cond(lhs, mid, els);
                self.cur = Some(mid);
                self.cond(rhs, then, els);
            }
            ExprKind::Binary {
                op: BinaryOp::LogOr,
                lhs,
                rhs,
            } => {
                let mid = self.new_block();
                self.cond(lhs, then, mid);
                self.cur = Some(mid);
                self.cond(rhs, then, els);
            }
            ExprKind::Binary { op, lhs, rhs } if op.is_comparison() => {
                let a = self.operand(lhs);
                let b = self.operand(rhs);
                self.terminate(Terminator::Branch {
                    cond: Cond::Compare(*op, a, b),
                    span: e.span,
                    then,
                    els,
                });
            }
            _ => {
                let v = self.operand(e);
                self.terminate(Terminator::Branch {
                    cond: Cond::Truthy(v),
                    span: e.span,
                    then,
                    els,
                });
            }
        }
    }

    // ---- statements ---------------------------------------------------------

    fn block_stmts(&mut self, b: &Block) {
        self.scopes.push(Vec::new());
        let mut reported = false;
        for s in &b.stmts {
            if self.cur.is_none() && !reported && !matches!(s.kind, StmtKind::Empty) {
                self.diags
                    .push(Diagnostic::new(Code::Unreachable, s.span, [("what", "statement")]));
                reported = true;
            }
            self.stmt(s);
        }
        let scope = self.scopes.pop().unwrap_or_default();
        if self.cur.is_some() && !scope.is_empty() {
            let ids: Vec<String> = scope.into_iter().map(|(_, id)| id).collect();
            self.emit(InstrKind::ScopeEnd(ids), b.close);
        }
    }

    fn decl(&mut self, d: &Declaration) {
        for id in &d.declarators {
            let decl = &id.declarator;
            let mut diags = Vec::new();
            let ty = self.tables.declared_type(&d.specs, decl, &mut diags);
            let mut anns: Vec<&crate::annotations::Annotation> = d.specs.annotations().collect();
            anns.extend(decl.annotations());
            let contract = self.tables.object_contract(&ty, &anns, Site::Local, &mut diags);
            for a in &anns {
                if matches!(a.kind, AnnotationKind::In(_) | AnnotationKind::Out(_)) {
                    diags.push(Diagnostic::detail(
                        Code::AnnConflict,
                        a.span,
                        format!("'{}' is not valid on a local variable", a.kind.name()),
                    ));
                }
            }
            self.diags.extend(diags);
            let span = decl.name.as_ref().map(|n| n.span).unwrap_or(decl.span);
            if let DeclSuffix::Array(Some(size)) = &decl.suffix {
                self.operand(size);
            }
            let lid = self.declare(decl.name(), ty.clone(), contract, LocalKind::Var, span);
            self.emit(InstrKind::Declare(lid.clone()), span);
            if let Some(init) = &id.init {
                let dest = Place::local(&lid, ty, span);
                self.store(dest, init, span.to(init.span));
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Block(b) => self.block_stmts(b),
            StmtKind::Decl(d) => self.decl(d),
            StmtKind::Expr(e) => self.effect(e),
            StmtKind::Empty => {}
            StmtKind::If { cond, then, els } => {
                let (tb, fb) = (self.new_block(), self.new_block());
                self.cond(cond, tb, fb);
                let join = self.new_block();
                self.cur = Some(tb);
                self.stmt(then);
                self.goto(join);
                self.cur = Some(fb);
                if let Some(e) = els {
                    self.stmt(e);
                }
                self.goto(join);
                let reachable = self.blocks.iter().any(|b| b.term.successors(self.exit).contains(&join));
                self.cur = reachable.then_some(join);
            }
            StmtKind::While { cond, body } => {
                let head = self.new_block();
                self.goto(head);
                self.cur = Some(head);
                let (bb, after) = (self.new_block(), self.new_block());
                self.cond(cond, bb, after);
                self.cur = Some(bb);
                self.stmt(body);
                self.goto(head);
                self.cur = Some(after);
            }
            StmtKind::Return { keyword, value } => {
                let (value, span) = match value {
                    Some(v) => {
                        let op = self.operand(v);
                        (Some(op), keyword.to(v.span))
                    }
                    None => (None, *keyword),
                };
                self.terminate(Terminator::Return {
                    value,
                    span,
                    implicit: false,
                });
            }
            StmtKind::Annotated { annotation, body } => {
                let (kind, k) = match &annotation.kind {
                    AnnotationKind::Checked(k) => (BlockKind::Checked, k.clone()),
                    AnnotationKind::Unchecked(k) => (BlockKind::Unchecked, k.clone()),
                    _ => {
                        self.stmt(body);
                        return;
                    }
                };
                self.emit(InstrKind::Enter(kind, k.clone()), annotation.span);
                self.stmt(body);
                if self.cur.is_some() {
                    self.emit(InstrKind::Exit(kind, k), annotation.span);
                }
            }
        }
    }
}

fn is_void_type(ty: &TypeName) -> bool {
    ty.specs
        .items
        .iter()
        .any(|i| matches!(i, SpecItem::TypeKeyword(k, _) if k == "void"))
}

/// Lowers one function definition.
pub fn lower_function(f: &FunctionDef, tables: &Tables) -> (Cfg, Vec<Diagnostic>) {
    let mut l = Lowerer::new(tables);
    let mut diags = Vec::new();
    let signature = tables.signature(&f.specs, &f.declarator, &mut diags);
    let mut params = Vec::new();
    let decl_params = f.declarator.params().unwrap_or(&[]);
    for (i, p) in signature.params.iter().enumerate() {
        let span = decl_params
            .get(i)
            .and_then(|d| d.declarator.name.as_ref().map(|n| n.span))
            .unwrap_or(f.declarator.span);
        let name = if p.name.is_empty() {
            format!("%arg{i}")
        } else {
            p.name.clone()
        };
        let id = l.declare(
            &name,
            p.contract.ty.clone(),
            p.contract.clone(),
            LocalKind::Param(i),
            span,
        );
        params.push(id);
    }
    l.block_stmts(&f.body);
    if l.cur.is_some() {
        l.terminate(Terminator::Return {
            value: None,
            span: f.body.close,
            implicit: true,
        });
    }
    let mut out = l.diags;
    out.extend(diags.into_iter().filter(|d| d.code == Code::Parse));
    let cfg = Cfg {
        function: f.name().to_string(),
        signature,
        locals: l.locals,
        params,
        blocks: l.blocks,
        entry: 0,
        exit: l.exit,
        span: f.span,
        sites: l.sites,
    };
    (cfg, out)
}

/// Lowers every function definition of a unit.
pub fn lower_unit(tu: &TranslationUnit, tables: &Tables) -> (Vec<Cfg>, Vec<Diagnostic>) {
    let mut cfgs = Vec::new();
    let mut diags = Vec::new();
    for item in &tu.items {
        if let ItemKind::FunctionDef(f) = &item.kind {
            let (cfg, d) = lower_function(f, tables);
            cfgs.push(cfg);
            diags.extend(d);
        }
    }
    (cfgs, diags)
}
