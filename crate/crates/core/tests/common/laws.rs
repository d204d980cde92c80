//! Algebraic and semantic laws of the abstract domains and the transfer
//! function, with their input strategies.

use std::sync::OnceLock;

use crusted::analysis::{analyze_function, transfer_block};
use crusted::annotations::{build_annotation_tables, Sentinel, Tables};
use crusted::domains::{AbstractState, Atom, MultiInterval, ResourceId, Typestate};
use crusted::frontend::ast::BinaryOp;
use crusted::frontend::{parse_source, resolve_includes};
use crusted::ir::{lower_unit, Cfg};
use proptest::prelude::*;
use proptest::sample::Index;
use proptest::test_runner::{Config, TestRunner};

pub const CASES: u32 = 1000;

type Law = Result<(), TestCaseError>;

pub fn atom() -> impl Strategy<Value = Atom> {
    let res = (0u32..3, prop_oneof![Just("heap-block"), Just("open-file-description")]).prop_map(|(site, class)| {
        ResourceId {
            site,
            class: class.to_string(),
        }
    });
    prop_oneof![
        Just(Atom::Uninitialized),
        Just(Atom::Initialized),
        res.prop_map(Atom::OwnedValid),
        Just(Atom::MovedOut),
        Just(Atom::Released),
        Just(Atom::Finalized),
        Just(Atom::BorrowedShared),
        Just(Atom::BorrowedExclusive),
        Just(Atom::Sentinel(Sentinel::Null)),
        (-2i64..1).prop_map(|v| Atom::Sentinel(Sentinel::Int(v))),
    ]
}

pub fn typestate() -> impl Strategy<Value = Typestate> {
    prop::collection::vec(atom(), 0..4).prop_map(Typestate::from_atoms)
}

/// Multi-intervals with all bounds in `lo..=hi`.
pub fn interval_in(lo: i64, hi: i64) -> impl Strategy<Value = MultiInterval> {
    prop::collection::vec((lo..=hi, 0i64..5), 0..4)
        .prop_map(move |v| MultiInterval::from_intervals(v.into_iter().map(|(l, w)| (l, (l + w).min(hi)))))
}

/// Multi-intervals with occasional infinite bounds.
pub fn multi_interval() -> impl Strategy<Value = MultiInterval> {
    (interval_in(-50, 50), any::<bool>(), any::<bool>()).prop_map(|(m, neg, pos)| {
        let mut ivs = m.intervals().to_vec();
        if let Some(first) = ivs.first_mut() {
            if neg {
                first.0 = i64::MIN;
            }
        }
        if let Some(last) = ivs.last_mut() {
            if pos {
                last.1 = i64::MAX;
            }
        }
        MultiInterval::from_intervals(ivs)
    })
}

pub fn binary_op() -> impl Strategy<Value = BinaryOp> {
    use BinaryOp::*;
    prop::sample::select(vec![
        Mul, Div, Rem, Add, Sub, Shl, Shr, Lt, Gt, Le, Ge, Eq, Ne, BitAnd, BitXor, BitOr, LogAnd, LogOr,
    ])
}

/// C semantics of `a op b`; `None` where the result is undefined.
fn concrete(op: BinaryOp, a: i64, b: i64) -> Option<i64> {
    use BinaryOp::*;
    Some(match op {
        Mul => a * b,
        Div => a.checked_div(b)?,
        Rem => a.checked_rem(b)?,
        Add => a + b,
        Sub => a - b,
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

fn members(m: &MultiInterval) -> Vec<i64> {
    m.intervals().iter().flat_map(|&(l, h)| l..=h).collect()
}

pub fn typestate_join_is_a_semilattice(a: Typestate, b: Typestate, c: Typestate) -> Law {
    prop_assert_eq!(a.join(&b), b.join(&a));
    prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
    prop_assert_eq!(a.join(&a), a.clone());
    prop_assert_eq!(a.join(&Typestate::bottom()), a.clone());
    prop_assert!(a.leq(&a.join(&b)) && b.leq(&a.join(&b)));
    prop_assert_eq!(a.leq(&b), a.join(&b) == b);
    Ok(())
}

pub fn typestate_widen_is_an_upper_bound(a: Typestate, b: Typestate) -> Law {
    let w = a.widen(&b);
    prop_assert!(a.leq(&w) && b.leq(&w));
    Ok(())
}

pub fn multi_interval_join_meet_laws(a: MultiInterval, b: MultiInterval, c: MultiInterval) -> Law {
    prop_assert_eq!(a.join(&b), b.join(&a));
    prop_assert_eq!(a.meet(&b), b.meet(&a));
    prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
    prop_assert_eq!(a.meet(&b).meet(&c), a.meet(&b.meet(&c)));
    prop_assert_eq!(a.join(&a), a.clone());
    prop_assert_eq!(a.meet(&a), a.clone());
    prop_assert_eq!(a.join(&a.meet(&b)), a.clone());
    prop_assert_eq!(a.meet(&a.join(&b)), a.clone());
    prop_assert!(a.is_subset(&a.join(&b)) && a.meet(&b).is_subset(&a));
    prop_assert_eq!(a.join(&MultiInterval::bottom()), a.clone());
    prop_assert_eq!(a.meet(&MultiInterval::top()), a.clone());
    Ok(())
}

pub fn multi_interval_widen_is_an_upper_bound(a: MultiInterval, b: MultiInterval) -> Law {
    let w = a.widen(&b);
    prop_assert!(a.is_subset(&w) && b.is_subset(&w), "{} widen {} = {}", a, b, w);
    Ok(())
}

/// Along `w' = w widen (w join s)`, at most four strict increases happen.
pub fn widening_chains_stabilize(start: MultiInterval, steps: Vec<MultiInterval>) -> Law {
    let mut w = start;
    let mut changes = 0;
    for s in &steps {
        let next = w.widen(&w.join(s));
        if next != w {
            changes += 1;
        }
        w = next;
    }
    prop_assert!(changes <= 4, "{} strict increases", changes);
    Ok(())
}

pub fn binop_is_sound(a: MultiInterval, b: MultiInterval, op: BinaryOp) -> Law {
    let (r, _) = MultiInterval::binop(op, &a, &b);
    for x in members(&a) {
        for y in members(&b) {
            if let Some(v) = concrete(op, x, y) {
                prop_assert!(r.contains(v), "{} {:?} {} = {} not in {}", x, op, y, v, r);
            }
        }
    }
    Ok(())
}

pub struct Unit {
    pub tables: Tables,
    pub cfgs: Vec<Cfg>,
}

/// Every corpus file, lowered once.
pub fn corpus_units() -> &'static Vec<Unit> {
    static UNITS: OnceLock<Vec<Unit>> = OnceLock::new();
    UNITS.get_or_init(|| {
        super::corpus()
            .into_iter()
            .map(|(_, src)| {
                let (mut tu, _) = parse_source(&src);
                let (libs, _) = resolve_includes(&mut tu);
                let (tables, _) = build_annotation_tables(&tu, &libs);
                let (cfgs, _) = lower_unit(&tu, &tables);
                Unit { tables, cfgs }
            })
            .collect()
    })
}

type BlockEntries = Vec<(usize, AbstractState)>;

/// (unit, function, block-entry states) for every function with more than
/// one recorded block entry.
fn block_states() -> &'static Vec<(usize, usize, BlockEntries)> {
    static STATES: OnceLock<Vec<(usize, usize, BlockEntries)>> = OnceLock::new();
    STATES.get_or_init(|| {
        let mut out = Vec::new();
        for (u, unit) in corpus_units().iter().enumerate() {
            for (f, cfg) in unit.cfgs.iter().enumerate() {
                let entries: BlockEntries = analyze_function(cfg, &unit.tables)
                    .points
                    .into_iter()
                    .filter(|p| p.index == 0)
                    .map(|p| (p.block, p.state))
                    .collect();
                if entries.len() > 1 {
                    out.push((u, f, entries));
                }
            }
        }
        out
    })
}

/// Runs a block from a corpus state and from its join with another state of
/// the same function; every outgoing state of the first run must lie below
/// the corresponding one of the second.
pub fn block_transfer_is_monotone(pick: Index, i: Index, j: Index) -> Law {
    let all = block_states();
    let (u, f, entries) = &all[pick.index(all.len())];
    let unit = &corpus_units()[*u];
    let cfg = &unit.cfgs[*f];
    let (b, small) = &entries[i.index(entries.len())];
    let (_, other) = &entries[j.index(entries.len())];
    let big = small.join(other);
    prop_assert!(small.leq(&big));
    let lo = transfer_block(cfg, &unit.tables, *b, small.clone());
    let hi = transfer_block(cfg, &unit.tables, *b, big);
    for (succ, s) in &lo {
        let Some((_, t)) = hi.iter().find(|(x, _)| x == succ) else {
            return Err(TestCaseError::fail(format!(
                "{}: edge to bb{} lost",
                cfg.function, succ
            )));
        };
        prop_assert!(
            s.leq(t),
            "{}: bb{} -> bb{}\n{}\nnot below\n{}",
            cfg.function,
            b,
            succ,
            s,
            t
        );
    }
    Ok(())
}

/// Checks that no analyzed corpus state has two definite owners of one
/// resource. Returns the number of states checked.
pub fn single_owner_everywhere() -> Result<usize, String> {
    let mut checked = 0;
    for unit in corpus_units() {
        for cfg in &unit.cfgs {
            for p in analyze_function(cfg, &unit.tables).points {
                if let Err((r, locs)) = p.state.check_single_owner() {
                    return Err(format!(
                        "{} bb{}[{}]: {:?} held by {:?}",
                        cfg.function, p.block, p.index, r, locs
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn run<S: Strategy>(strategy: S, law: impl Fn(S::Value) -> Law) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, law).map_err(|e| e.to_string())
}

/// Every law under [`CASES`] random inputs, by name.
pub fn run_all() -> Vec<(&'static str, Result<(), String>)> {
    vec![
        (
            "typestate join",
            run((typestate(), typestate(), typestate()), |(a, b, c)| {
                typestate_join_is_a_semilattice(a, b, c)
            }),
        ),
        (
            "typestate widen",
            run((typestate(), typestate()), |(a, b)| {
                typestate_widen_is_an_upper_bound(a, b)
            }),
        ),
        (
            "multi-interval join/meet",
            run((multi_interval(), multi_interval(), multi_interval()), |(a, b, c)| {
                multi_interval_join_meet_laws(a, b, c)
            }),
        ),
        (
            "multi-interval widen",
            run((multi_interval(), multi_interval()), |(a, b)| {
                multi_interval_widen_is_an_upper_bound(a, b)
            }),
        ),
        (
            "widening termination",
            run(
                (multi_interval(), prop::collection::vec(multi_interval(), 1..12)),
                |(s, v)| widening_chains_stabilize(s, v),
            ),
        ),
        (
            "binop soundness",
            run((interval_in(-8, 8), interval_in(-8, 8), binary_op()), |(a, b, op)| {
                binop_is_sound(a, b, op)
            }),
        ),
        (
            "monotone transfer",
            run((any::<Index>(), any::<Index>(), any::<Index>()), |(p, i, j)| {
                block_transfer_is_monotone(p, i, j)
            }),
        ),
    ]
}
