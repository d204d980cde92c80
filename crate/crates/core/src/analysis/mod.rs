//! Intraprocedural abstract interpretation of lowered functions.
//!
//! Each function is analyzed on its own against the declared contracts of
//! its callees. A silent worklist fixpoint computes the state at the start
//! of every block; a second pass replays each block once from that state
//! and reports what it finds.

mod exit;
mod guards;
pub mod liveness;
mod transfer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::annotations::tables::{InitMode, RefKind, Tables};
use crate::annotations::types::QualType;
use crate::annotations::Sentinel;
use crate::diagnostics::{Code, Diagnostic};
use crate::domains::{
    AbstractState, Atom, Loc, MultiInterval, NominalTag, PlaceFacts, ReferentSet, ResourceId, Typestate,
};
use crate::ir::{BlockId, Cfg, LocalKind, Operand, Rvalue, Terminator};
use crate::span::Span;

use liveness::Liveness;

/// Maximum number of times one block is processed.
pub const MAX_VISITS: usize = 64;
/// Visits of a loop head after which widening replaces join.
pub const WIDEN_AFTER: usize = 3;

/// The state before one instruction (or before the terminator when `index`
/// equals the number of instructions).
#[derive(Clone, Debug)]
pub struct ProgramPoint {
    pub block: BlockId,
    pub index: usize,
    pub text: String,
    pub state: AbstractState,
}

#[derive(Clone, Debug)]
pub struct AnalysisResult {
    pub function: String,
    pub diagnostics: Vec<Diagnostic>,
    pub points: Vec<ProgramPoint>,
    /// How many times each block was processed by the fixpoint.
    pub visits: Vec<usize>,
    pub converged: bool,
}

impl AnalysisResult {
    /// Deterministic text rendering of every program point's state.
    pub fn dump_states(&self) -> String {
        let mut out = format!("function {}:\n", self.function);
        for p in &self.points {
            let _ = writeln!(out, "  bb{}[{}] {}", p.block, p.index, p.text);
            out.push_str(&p.state.to_string());
        }
        out
    }
}

pub(crate) fn rvalue_operands(r: &Rvalue) -> Vec<&Operand> {
    match r {
        Rvalue::Use(o) | Rvalue::Unary(_, o) | Rvalue::Cast { operand: o, .. } => vec![o],
        Rvalue::Binary(_, a, b) => vec![a, b],
    }
}

/// An evaluated operand.
#[derive(Clone, Debug)]
pub(crate) struct Value {
    pub facts: PlaceFacts,
    /// Where the value was read from.
    pub src: Vec<Loc>,
    /// Whether `src` is a single location that admits strong updates.
    pub strong: bool,
    pub konst: bool,
    pub ty: QualType,
}

impl Value {
    fn strong_loc(&self) -> Option<&Loc> {
        if self.strong && self.src.len() == 1 {
            self.src.first()
        } else {
            None
        }
    }
}

pub(crate) struct Analyzer<'a> {
    cfg: &'a Cfg,
    tables: &'a Tables,
    live: Liveness,
    report: bool,
    diags: Vec<Diagnostic>,
    seen: BTreeSet<(Code, Span, String)>,
    block: BlockId,
    /// Current instruction, or `None` while at the terminator.
    index: Option<usize>,
}

pub(crate) fn sentinel_value(s: Sentinel) -> Option<i64> {
    match s {
        Sentinel::Int(v) => Some(v),
        Sentinel::Null => None,
    }
}

impl<'a> Analyzer<'a> {
    fn new(cfg: &'a Cfg, tables: &'a Tables) -> Self {
        Analyzer {
            cfg,
            tables,
            live: Liveness::compute(cfg),
            report: false,
            diags: Vec::new(),
            seen: BTreeSet::new(),
            block: 0,
            index: None,
        }
    }

    fn emit(&mut self, d: Diagnostic) {
        if !self.report {
            return;
        }
        let key = (d.code, d.span, d.place().unwrap_or_default().to_string());
        if self.seen.insert(key) {
            self.diags.push(d);
        }
    }

    fn live_now(&self) -> &BTreeSet<String> {
        match self.index {
            Some(i) => self.live.after(self.block, i),
            None => self.live.after_term(self.block),
        }
    }

    /// Display name of an abstract location.
    fn loc_text(&self, l: &Loc) -> String {
        match l {
            Loc::Var(id) => self.cfg.name_of(id).to_string(),
            Loc::Field(base, f) => format!("{}.{f}", self.loc_text(base)),
            Loc::Target(p) => format!("*{}", self.cfg.name_of(p)),
            other => other.to_string(),
        }
    }

    fn entry_state(&self) -> AbstractState {
        let mut st = AbstractState::default();
        for (i, id) in self.cfg.params.iter().enumerate() {
            let local = &self.cfg.locals[id];
            let c = &local.contract;
            let mut ts = if c.is_owning() {
                Typestate::of(Atom::OwnedValid(ResourceId {
                    site: self.cfg.sites + i as u32,
                    class: c.resource_class.clone().unwrap_or_else(|| "resource".to_string()),
                }))
            } else {
                match (local.ty.is_pointer(), c.ref_kind) {
                    (true, Some(RefKind::Shared)) => Typestate::of(Atom::BorrowedShared),
                    (true, Some(RefKind::Exclusive)) => Typestate::of(Atom::BorrowedExclusive),
                    _ => Typestate::of(Atom::Initialized),
                }
            };
            let mut range = c.ordinary_values();
            let mut refs = ReferentSet::empty();
            if let Some(s) = c.optional {
                ts.insert(Atom::Sentinel(s));
                match sentinel_value(s) {
                    Some(v) => range = range.join(&MultiInterval::singleton(v)),
                    None => refs.insert(Loc::Null),
                }
            }
            let mut facts = PlaceFacts::new(ts, range);
            facts.nominal = NominalTag::of(c.nominal.clone());
            if let Some(pointee) = local.ty.pointee() {
                refs.insert(Loc::Target(id.clone()));
                let target_ts = match c.init {
                    InitMode::RequiresInit => Atom::Initialized,
                    InitMode::Initializes | InitMode::MayBeUninit => Atom::Uninitialized,
                };
                let mut target = PlaceFacts::new(Typestate::of(target_ts), pointee.value_range());
                for (k, v) in &c.in_props {
                    target.props.set(k, v);
                }
                st.set(Loc::Target(id.clone()), target);
            } else {
                for (k, v) in &c.in_props {
                    facts.props.set(k, v);
                }
            }
            facts.refs = refs;
            st.set(Loc::var(id), facts);
        }
        st
    }

    /// Runs one block from `st`, returning the states flowing to each
    /// successor. When `points` is given, the state before every
    /// instruction is recorded.
    fn run_block(
        &mut self,
        b: BlockId,
        mut st: AbstractState,
        mut points: Option<&mut Vec<ProgramPoint>>,
    ) -> Vec<(BlockId, AbstractState)> {
        let cfg = self.cfg;
        self.block = b;
        let block = &cfg.blocks[b];
        for (i, ins) in block.instrs.iter().enumerate() {
            self.index = Some(i);
            if let Some(p) = points.as_deref_mut() {
                p.push(ProgramPoint {
                    block: b,
                    index: i,
                    text: cfg.instr_text(ins),
                    state: st.clone(),
                });
            }
            self.instr(&mut st, ins);
        }
        self.index = None;
        if let Some(p) = points.as_mut() {
            p.push(ProgramPoint {
                block: b,
                index: block.instrs.len(),
                text: cfg.term_text(&block.term),
                state: st.clone(),
            });
        }
        match &block.term {
            Terminator::Goto(t) => vec![(*t, st)],
            Terminator::Branch { cond, then, els, .. } => {
                let (t, e) = self.branch(st, cond);
                let mut out = Vec::new();
                if let Some(t) = t {
                    out.push((*then, t));
                }
                if let Some(e) = e {
                    out.push((*els, e));
                }
                out
            }
            Terminator::Return { value, span, implicit } => {
                self.on_return(&mut st, value.as_ref(), *span, *implicit);
                Vec::new()
            }
            Terminator::Exit => Vec::new(),
        }
    }

    fn fixpoint(&mut self, entry: AbstractState) -> (Vec<Option<AbstractState>>, Vec<usize>, bool) {
        let cfg = self.cfg;
        let n = cfg.blocks.len();
        let rpo = cfg.reverse_postorder();
        let mut pos = vec![usize::MAX; n];
        for (i, b) in rpo.iter().enumerate() {
            pos[*b] = i;
        }
        let heads: BTreeSet<BlockId> = cfg.loop_heads().into_iter().collect();
        let mut states: Vec<Option<AbstractState>> = vec![None; n];
        let mut visits = vec![0usize; n];
        let mut converged = true;
        states[cfg.entry] = Some(entry);
        let mut work = BTreeSet::from([pos[cfg.entry]]);
        while let Some(p) = work.pop_first() {
            let b = rpo[p];
            if visits[b] >= MAX_VISITS {
                converged = false;
                continue;
            }
            visits[b] += 1;
            let st = states[b].clone().expect("queued blocks have a state");
            for (s, out) in self.run_block(b, st, None) {
                let next = match &states[s] {
                    None => out,
                    Some(old) => {
                        let joined = old.join(&out);
                        if heads.contains(&s) && visits[s] >= WIDEN_AFTER {
                            old.widen(&joined)
                        } else {
                            joined
                        }
                    }
                };
                if states[s].as_ref() != Some(&next) {
                    states[s] = Some(next);
                    if pos[s] != usize::MAX {
                        work.insert(pos[s]);
                    }
                }
            }
        }
        (states, visits, converged)
    }
}

/// Analyzes one lowered function.
pub fn analyze_function(cfg: &Cfg, tables: &Tables) -> AnalysisResult {
    let mut a = Analyzer::new(cfg, tables);
    let entry = a.entry_state();
    let (states, visits, converged) = a.fixpoint(entry);
    a.report = true;
    let mut points = Vec::new();
    for b in cfg.reverse_postorder() {
        if let Some(st) = states[b].clone() {
            a.run_block(b, st, Some(&mut points));
        }
    }
    AnalysisResult {
        function: cfg.function.clone(),
        diagnostics: a.diags,
        points,
        visits,
        converged,
    }
}

/// Runs block `b` from `st` without reporting and returns the state
/// flowing to each feasible successor.
pub fn transfer_block(cfg: &Cfg, tables: &Tables, b: BlockId, st: AbstractState) -> Vec<(BlockId, AbstractState)> {
    Analyzer::new(cfg, tables).run_block(b, st, None)
}

/// Whether a local is a declared borrow: a pointer to const or a pointer
/// with an explicit reference kind.
pub(crate) fn borrow_kind(cfg: &Cfg, id: &str) -> Option<RefKind> {
    let local = cfg.locals.get(id)?;
    if local.kind != LocalKind::Var {
        return None;
    }
    let pointee = local.ty.pointee()?;
    match local.contract.ref_kind {
        Some(k) => Some(k),
        None if pointee.is_const => Some(RefKind::Shared),
        None => None,
    }
}
