//! Normalized statement IR and control-flow graphs.

mod lower;

use std::collections::BTreeMap;
use std::fmt;

use crate::annotations::tables::{AnnotatedSignature, Contract};
use crate::annotations::types::QualType;
use crate::domains::BlockKind;
use crate::frontend::ast::{BinaryOp, UnaryOp};
use crate::span::Span;

pub use lower::{lower_function, lower_unit};

pub type BlockId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Proj {
    Deref,
    Field(String),
    Index(Operand),
}

/// A memory place: a variable followed by projections.
#[derive(Clone, Debug, PartialEq)]
pub struct Place {
    /// Unique local id, or the name of a global.
    pub base: String,
    pub global: bool,
    pub projs: Vec<Proj>,
    /// `tys[i]` is the type of the prefix before `projs[i]`; the last entry
    /// is the type of the whole place.
    pub tys: Vec<QualType>,
    pub span: Span,
}

impl Place {
    pub fn local(id: &str, ty: QualType, span: Span) -> Place {
        Place {
            base: id.to_string(),
            global: false,
            projs: Vec::new(),
            tys: vec![ty],
            span,
        }
    }

    pub fn ty(&self) -> &QualType {
        self.tys.last().expect("place has a type")
    }

    pub fn is_var(&self) -> bool {
        self.projs.is_empty()
    }

    pub fn push(&mut self, p: Proj, ty: QualType) {
        self.projs.push(p);
        self.tys.push(ty);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Const {
    Int(i64),
    /// Real constants, rounded outward to integer bounds.
    Float(f64),
    Null,
    Str(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Copy(Place),
    Const(Const, Span),
    AddrOf(Place),
}

impl Operand {
    pub fn span(&self) -> Span {
        match self {
            Operand::Copy(p) => p.span,
            Operand::Const(_, s) => *s,
            Operand::AddrOf(p) => p.span,
        }
    }

    pub fn place(&self) -> Option<&Place> {
        match self {
            Operand::Copy(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rvalue {
    Use(Operand),
    Binary(BinaryOp, Operand, Operand),
    Unary(UnaryOp, Operand),
    Cast {
        operand: Operand,
        ty: QualType,
        /// The cast turns a pointer to const into a pointer to non-const.
        drops_const: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arg {
    pub value: Operand,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InstrKind {
    /// Start of a local's lifetime; its value is indeterminate.
    Declare(String),
    Assign {
        dest: Place,
        value: Rvalue,
        /// `++`/`--` written as an increment or decrement.
        incdec: Option<UnaryOp>,
    },
    Call {
        dest: Option<Place>,
        callee: String,
        args: Vec<Arg>,
        /// Identifies the call for resources it acquires.
        site: u32,
    },
    Enter(BlockKind, String),
    Exit(BlockKind, String),
    /// The listed locals go out of scope.
    ScopeEnd(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instr {
    pub kind: InstrKind,
    pub span: Span,
}

/// A branch condition. Comparisons keep their operands so that guards can
/// refine the state.
#[derive(Clone, Debug, PartialEq)]
pub enum Cond {
    Compare(BinaryOp, Operand, Operand),
    /// Non-zero test of a value.
    Truthy(Operand),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Terminator {
    Goto(BlockId),
    Branch {
        cond: Cond,
        span: Span,
        then: BlockId,
        els: BlockId,
    },
    Return {
        value: Option<Operand>,
        span: Span,
        /// Falling off the end of the body.
        implicit: bool,
    },
    /// The exit block.
    Exit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasicBlock {
    pub instrs: Vec<Instr>,
    pub term: Terminator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalKind {
    Param(usize),
    Var,
    Temp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Local {
    pub id: String,
    /// The name as written; temporaries are named `%N`.
    pub name: String,
    pub ty: QualType,
    pub contract: Contract,
    pub kind: LocalKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cfg {
    pub function: String,
    pub signature: AnnotatedSignature,
    pub locals: BTreeMap<String, Local>,
    /// Parameter ids in order.
    pub params: Vec<String>,
    pub blocks: Vec<BasicBlock>,
    pub entry: BlockId,
    pub exit: BlockId,
    pub span: Span,
    /// Number of call sites; parameter resources use ids above these.
    pub sites: u32,
}

impl Terminator {
    pub fn successors(&self, exit: BlockId) -> Vec<BlockId> {
        match self {
            Terminator::Goto(b) => vec![*b],
            Terminator::Branch { then, els, .. } => vec![*then, *els],
            Terminator::Return { .. } => vec![exit],
            Terminator::Exit => Vec::new(),
        }
    }
}

impl Cfg {
    pub fn successors(&self, b: BlockId) -> Vec<BlockId> {
        self.blocks[b].term.successors(self.exit)
    }

    pub fn predecessors(&self) -> Vec<Vec<BlockId>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for b in 0..self.blocks.len() {
            for s in self.successors(b) {
                if !preds[s].contains(&b) {
                    preds[s].push(b);
                }
            }
        }
        preds
    }

    /// Reachable blocks in reverse postorder; successors are visited in
    /// order, so ties break by branch position and block id.
    pub fn reverse_postorder(&self) -> Vec<BlockId> {
        let mut seen = vec![false; self.blocks.len()];
        let mut post = Vec::new();
        let mut stack: Vec<(BlockId, usize)> = vec![(self.entry, 0)];
        seen[self.entry] = true;
        while let Some((b, i)) = stack.pop() {
            let succ = self.successors(b);
            if i < succ.len() {
                stack.push((b, i + 1));
                let s = succ[i];
                if !seen[s] {
                    seen[s] = true;
                    stack.push((s, 0));
                }
            } else {
                post.push(b);
            }
        }
        post.reverse();
        post
    }

    /// Blocks that are targets of back edges in the depth-first order.
    pub fn loop_heads(&self) -> Vec<BlockId> {
        let order = self.reverse_postorder();
        let mut pos = vec![usize::MAX; self.blocks.len()];
        for (i, b) in order.iter().enumerate() {
            pos[*b] = i;
        }
        let mut heads = Vec::new();
        for &b in &order {
            for s in self.successors(b) {
                if pos[s] <= pos[b] && !heads.contains(&s) {
                    heads.push(s);
                }
            }
        }
        heads.sort();
        heads
    }

    pub fn has_loops(&self) -> bool {
        !self.loop_heads().is_empty()
    }

    /// The source name of a local id.
    pub fn name_of<'a>(&'a self, id: &'a str) -> &'a str {
        self.locals.get(id).map(|l| l.name.as_str()).unwrap_or(id)
    }

    /// Renders a place as source-like text.
    pub fn place_text(&self, p: &Place) -> String {
        let mut s = self.name_of(&p.base).to_string();
        let mut i = 0;
        while i < p.projs.len() {
            match &p.projs[i] {
                Proj::Deref => {
                    if let Some(Proj::Field(f)) = p.projs.get(i + 1) {
                        s = format!("{s}->{f}");
                        i += 1;
                    } else {
                        s = format!("*{s}");
                    }
                }
                Proj::Field(f) => s = format!("{s}.{f}"),
                Proj::Index(op) => s = format!("{s}[{}]", self.operand_text(op)),
            }
            i += 1;
        }
        s
    }

    pub fn operand_text(&self, op: &Operand) -> String {
        match op {
            Operand::Copy(p) => self.place_text(p),
            Operand::AddrOf(p) => format!("&{}", self.place_text(p)),
            Operand::Const(c, _) => match c {
                Const::Int(v) => v.to_string(),
                Const::Float(v) => v.to_string(),
                Const::Null => "NULL".to_string(),
                Const::Str(s) => s.clone(),
            },
        }
    }

    fn rvalue_text(&self, r: &Rvalue) -> String {
        match r {
            Rvalue::Use(o) => self.operand_text(o),
            Rvalue::Binary(op, a, b) => format!("{} {} {}", self.operand_text(a), op.as_str(), self.operand_text(b)),
            Rvalue::Unary(op, a) => format!("{}{}", op.as_str(), self.operand_text(a)),
            Rvalue::Cast {
                operand,
                ty,
                drops_const,
            } => format!(
                "({ty}){}{}",
                self.operand_text(operand),
                if *drops_const { " [drops const]" } else { "" }
            ),
        }
    }

    pub fn instr_text(&self, i: &Instr) -> String {
        match &i.kind {
            InstrKind::Declare(id) => {
                format!("declare {}: {}", self.name_of(id), self.locals[id].ty)
            }
            InstrKind::Assign { dest, value, incdec } => {
                let tag = if incdec.is_some() { " (incdec)" } else { "" };
                format!("{} = {}{tag}", self.place_text(dest), self.rvalue_text(value))
            }
            InstrKind::Call {
                dest,
                callee,
                args,
                site,
            } => {
                let args: Vec<String> = args.iter().map(|a| self.operand_text(&a.value)).collect();
                let call = format!("call {callee}({}) @site{site}", args.join(", "));
                match dest {
                    Some(d) => format!("{} = {call}", self.place_text(d)),
                    None => call,
                }
            }
            InstrKind::Enter(k, kind) => format!("enter {k:?}(\"{kind}\")"),
            InstrKind::Exit(k, kind) => format!("exit {k:?}(\"{kind}\")"),
            InstrKind::ScopeEnd(ids) => {
                let names: Vec<&str> = ids.iter().map(|i| self.name_of(i)).collect();
                format!("scope-end {}", names.join(", "))
            }
        }
    }

    pub fn cond_text(&self, c: &Cond) -> String {
        match c {
            Cond::Compare(op, a, b) => format!("{} {} {}", self.operand_text(a), op.as_str(), self.operand_text(b)),
            Cond::Truthy(o) => self.operand_text(o),
        }
    }

    pub fn term_text(&self, t: &Terminator) -> String {
        match t {
            Terminator::Goto(b) => format!("goto bb{b}"),
            Terminator::Branch { cond, then, els, .. } => {
                format!("branch {} ? bb{then} : bb{els}", self.cond_text(cond))
            }
            Terminator::Return { value, implicit, .. } => {
                let v = value
                    .as_ref()
                    .map(|v| format!(" {}", self.operand_text(v)))
                    .unwrap_or_default();
                let tag = if *implicit { " (implicit)" } else { "" };
                format!("return{v}{tag}")
            }
            Terminator::Exit => "exit".to_string(),
        }
    }
}

impl fmt::Display for Cfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "function {}", self.function)?;
        for l in self.locals.values() {
            let kind = match l.kind {
                LocalKind::Param(i) => format!("param {i}"),
                LocalKind::Var => "local".to_string(),
                LocalKind::Temp => "temp".to_string(),
            };
            writeln!(f, "  {kind} {}: {}", l.id, l.ty)?;
        }
        for (i, b) in self.blocks.iter().enumerate() {
            let marker = if i == self.entry {
                " (entry)"
            } else if i == self.exit {
                " (exit)"
            } else {
                ""
            };
            writeln!(f, "  bb{i}{marker}:")?;
            for instr in &b.instrs {
                writeln!(f, "    {}    @{}", self.instr_text(instr), instr.span)?;
            }
            writeln!(f, "    {}", self.term_text(&b.term))?;
        }
        Ok(())
    }
}
