//! Backward liveness of locals, used to decide which borrows are still
//! usable at a program point.

use std::collections::BTreeSet;

use crate::ir::{BlockId, Cfg, Cond, InstrKind, Operand, Place, Proj, Terminator};

type Set = BTreeSet<String>;

#[derive(Clone, Debug, Default)]
pub struct Liveness {
    /// Locals live after each instruction of each block.
    after: Vec<Vec<Set>>,
    /// Locals live after each block's terminator.
    out: Vec<Set>,
}

fn use_place(p: &Place, uses: &mut Set) {
    if !p.global {
        uses.insert(p.base.clone());
    }
    for proj in &p.projs {
        if let Proj::Index(o) = proj {
            use_operand(o, uses);
        }
    }
}

fn use_operand(o: &Operand, uses: &mut Set) {
    match o {
        Operand::Copy(p) | Operand::AddrOf(p) => use_place(p, uses),
        Operand::Const(..) => {}
    }
}

/// Applies a destination: a whole local is killed, anything else is a use.
fn def_place(p: &Place, live: &mut Set) {
    if p.is_var() {
        if !p.global {
            live.remove(&p.base);
        }
    } else {
        use_place(p, live);
    }
}

fn step(kind: &InstrKind, live: &mut Set) {
    match kind {
        InstrKind::Declare(id) => {
            live.remove(id);
        }
        InstrKind::Assign { dest, value, .. } => {
            let mut uses = Set::new();
            crate::analysis::rvalue_operands(value)
                .into_iter()
                .for_each(|o| use_operand(o, &mut uses));
            def_place(dest, live);
            live.extend(uses);
        }
        InstrKind::Call { dest, args, .. } => {
            if let Some(d) = dest {
                def_place(d, live);
            }
            for a in args {
                use_operand(&a.value, live);
            }
        }
        InstrKind::Enter(..) | InstrKind::Exit(..) | InstrKind::ScopeEnd(_) => {}
    }
}

fn term_uses(t: &Terminator, live: &mut Set) {
    match t {
        Terminator::Branch { cond, .. } => match cond {
            Cond::Compare(_, a, b) => {
                use_operand(a, live);
                use_operand(b, live);
            }
            Cond::Truthy(a) => use_operand(a, live),
        },
        Terminator::Return { value: Some(v), .. } => use_operand(v, live),
        _ => {}
    }
}

impl Liveness {
    pub fn compute(cfg: &Cfg) -> Liveness {
        let n = cfg.blocks.len();
        let mut live_in: Vec<Set> = vec![Set::new(); n];
        let mut changed = true;
        while changed {
            changed = false;
            for b in (0..n).rev() {
                let mut live = Set::new();
                for s in cfg.successors(b) {
                    live.extend(live_in[s].iter().cloned());
                }
                term_uses(&cfg.blocks[b].term, &mut live);
                for i in cfg.blocks[b].instrs.iter().rev() {
                    step(&i.kind, &mut live);
                }
                if live != live_in[b] {
                    live_in[b] = live;
                    changed = true;
                }
            }
        }
        let mut after = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for b in 0..n {
            let mut live = Set::new();
            for s in cfg.successors(b) {
                live.extend(live_in[s].iter().cloned());
            }
            out.push(live.clone());
            term_uses(&cfg.blocks[b].term, &mut live);
            let instrs = &cfg.blocks[b].instrs;
            let mut per = vec![Set::new(); instrs.len()];
            for (i, ins) in instrs.iter().enumerate().rev() {
                per[i] = live.clone();
                step(&ins.kind, &mut live);
            }
            after.push(per);
        }
        Liveness { after, out }
    }

    pub fn after(&self, b: BlockId, i: usize) -> &Set {
        &self.after[b][i]
    }

    pub fn after_term(&self, b: BlockId) -> &Set {
        &self.out[b]
    }
}
