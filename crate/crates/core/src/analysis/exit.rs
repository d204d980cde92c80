//! Checks at function exit.

use super::*;
use crate::annotations::PropValue;
use crate::domains::Prop;

impl Analyzer<'_> {
    pub(super) fn on_return(&mut self, st: &mut AbstractState, value: Option<&Operand>, span: Span, _implicit: bool) {
        let cfg = self.cfg;
        let rc = &cfg.signature.ret;
        let v = value.map(|o| self.eval_operand(st, o));
        if let Some(v) = &v {
            if let Some(s) = v.facts.ts.sentinels().next() {
                if rc.optional.is_none() {
                    self.emit(Diagnostic::new(
                        Code::OptRet,
                        span,
                        [("sentinel", s.to_string()), ("function", cfg.function.clone())],
                    ));
                }
            }
            if let Some(expected) = rc.value.as_ref().filter(|_| rc.ty.is_scalar_number()) {
                let mut actual = v.facts.range.meet(&rc.ty.value_range());
                if let Some(s) = rc.optional.and_then(sentinel_value) {
                    actual = actual.without(s);
                }
                if !actual.is_bottom() && !actual.is_subset(expected) {
                    self.emit(Diagnostic::new(
                        Code::ValRange,
                        span,
                        [("actual", actual.to_string()), ("expected", expected.to_string())],
                    ));
                }
            }
        }
        let returned: BTreeSet<ResourceId> = match &v {
            Some(v) if rc.is_owning() => v.facts.ts.owned().cloned().collect(),
            _ => BTreeSet::new(),
        };
        // Preferred holder per leaked resource: definite owners first, then
        // declared variables over temporaries.
        let mut leaks: BTreeMap<ResourceId, (bool, bool, Loc)> = BTreeMap::new();
        for (loc, f) in &st.places {
            let Loc::Var(id) = loc.root() else {
                continue;
            };
            let temp = cfg.locals.get(id).is_none_or(|l| l.kind == LocalKind::Temp);
            for r in f.ts.owned().filter(|r| !returned.contains(*r)) {
                let key = (!f.ts.definitely_owns(r), temp, loc.clone());
                leaks
                    .entry(r.clone())
                    .and_modify(|k| {
                        if key < *k {
                            *k = key.clone();
                        }
                    })
                    .or_insert(key);
            }
        }
        for (r, (_, _, loc)) in leaks {
            self.emit(Diagnostic::new(
                Code::OwnLeak,
                span,
                [("place", self.loc_text(&loc)), ("resource-class", r.class)],
            ));
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
            if c.out_props.is_empty() && c.in_props.is_empty() {
                continue;
            }
            let target = if local.ty.is_pointer() {
                Loc::Target(id.clone())
            } else {
                Loc::var(id)
            };
            let props = st.get(&target).map(|f| f.props.clone()).unwrap_or_default();
            let report = |this: &mut Self, k: &str, expected: String| {
                this.emit(Diagnostic::new(
                    Code::PostViolation,
                    span,
                    [
                        ("place", local.name.clone()),
                        ("property", k.to_string()),
                        ("actual", props.get(k).to_string()),
                        ("expected", expected),
                    ],
                ));
            };
            for (k, val) in &c.out_props {
                if !props.entails(k, val) {
                    report(self, k, val.to_string());
                }
            }
            for (k, val) in &c.in_props {
                if c.out_props.contains_key(k) {
                    continue;
                }
                if let PropValue::Atom(a) = val {
                    if props.get(k) != Prop::Atom(a.as_str()) {
                        report(self, k, a.clone());
                    }
                }
            }
        }
    }
}
