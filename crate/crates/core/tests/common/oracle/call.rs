//! Calls against declared contracts.

use super::eval::{null_constant, null_value, Ev};
use super::*;
use crusted::annotations::tables::Ownership;
use crusted::ir::Arg;

impl Machine<'_> {
    fn arg_text(&self, o: &Operand) -> String {
        match o {
            Operand::Copy(p) | Operand::AddrOf(p) => self.cfg.place_text(p),
            other => self.cfg.operand_text(other),
        }
    }

    fn referent_text(&self, o: &Operand) -> String {
        match o {
            Operand::AddrOf(p) => self.cfg.place_text(p),
            Operand::Copy(p) => format!("*{}", self.cfg.place_text(p)),
            other => self.cfg.operand_text(other),
        }
    }

    fn set_data(&self, st: &mut St, o: &Obj, data: Data) {
        let mut v = self.read_cell(st, o, &QualType::plain(CType::Void));
        v.data = data;
        st.cells.insert(o.clone(), v);
    }

    pub(crate) fn call(
        &mut self,
        st: &mut St,
        dest: Option<&Place>,
        callee: &str,
        args: &[Arg],
        site: u32,
        span: Span,
    ) -> R<()> {
        let tables = self.tables;
        let Some(info) = tables.function(callee) else {
            return Ok(());
        };
        let sig = &info.signature;
        let annotated = sig.annotated || info.from_model;
        let mut evs = Vec::new();
        for a in args {
            evs.push(self.eval_operand(st, &a.value)?);
        }
        for (i, ev) in evs.iter_mut().enumerate() {
            if sig.params.get(i).is_some_and(|p| p.contract.ty.is_pointer()) {
                ev.val = null_constant(ev.val.clone());
            }
        }
        let texts: Vec<String> = args.iter().map(|a| self.arg_text(&a.value)).collect();
        let mut moves = Vec::new();
        for (i, (a, ev)) in args.iter().zip(&evs).enumerate() {
            let v = &ev.val;
            let param = sig.params.get(i);
            if v.sentinel.is_some() && param.is_none_or(|p| p.contract.optional.is_none()) {
                self.report(Code::OptArg, a.span, &texts[i]);
            }
            let Some(pc) = param.map(|p| &p.contract) else {
                if !annotated && v.owns.is_some() {
                    self.report(Code::OwnUnclear, span, &texts[i]);
                }
                continue;
            };
            if let Some(root) = &pc.nominal {
                let mix = match &v.tag {
                    Some(x) => x != root && x != UNKNOWN_TAG,
                    None => !v.konst,
                };
                if mix {
                    self.report(Code::NominalMix, a.span, &texts[i]);
                }
            }
            let referent = v.target().cloned();
            match pc.ownership {
                Ownership::Borrow => {
                    if !annotated && v.owns.is_some() {
                        self.report(Code::OwnUnclear, span, &texts[i]);
                    }
                }
                Ownership::Owning | Ownership::Release => {
                    if v.owns.is_none() {
                        let already = matches!(v.data, Data::Moved | Data::Released);
                        if v.sentinel.is_none() && !already {
                            self.report(Code::ReleaseInvalid, a.span, &texts[i]);
                        }
                    } else if pc.ownership == Ownership::Release {
                        let fini = ev.ty.pointee().is_some_and(|pt| tables.props_of(pt).fini_required);
                        let live = referent
                            .as_ref()
                            .is_some_and(|r| st.cells.get(r).is_some_and(Val::plain_init));
                        if fini && live {
                            self.report(Code::ReleaseInvalid, a.span, &texts[i]);
                        }
                    }
                    moves.push(i);
                }
            }
            if let (Some(pointee), Some(r)) = (pc.ty.pointee(), &referent) {
                if pc.init == InitMode::RequiresInit && pc.ownership != Ownership::Release {
                    let pt = ev.ty.pointee().unwrap_or(pointee).clone();
                    let d = self.read_cell(st, r, &pt).data;
                    if matches!(d, Data::Uninit | Data::Finalized) {
                        let t = self.referent_text(&a.value);
                        self.report(Code::UninitUse, a.span, &t);
                    }
                }
            }
            if !pc.in_props.is_empty() {
                let holder = if pc.ty.pointee().is_some() {
                    referent.as_ref().map(|r| self.read_cell(st, r, &pc.ty))
                } else {
                    ev.src.as_ref().filter(|s| !s.opaque()).map(|_| v.clone())
                };
                let holder = holder.unwrap_or_else(|| Val::of(Data::Blob));
                if pc.in_props.iter().any(|(k, p)| !holder.entails(k, p)) {
                    self.report(Code::PreViolation, a.span, &texts[i]);
                }
            }
        }
        self.aliasing(sig, args, &evs, &texts);

        for &i in &moves {
            let ev = &evs[i];
            if let Some(src) = ev.src.as_ref().filter(|_| ev.strong) {
                let mut old = self.read_cell(st, src, &ev.ty);
                old.data = Data::Moved;
                old.owns = None;
                st.cells.insert(src.clone(), old);
            }
            if sig.params[i].contract.ownership == Ownership::Release {
                if let Some(r) = ev.val.target() {
                    let r = r.clone();
                    self.set_data(st, &r, Data::Released);
                }
            }
        }
        let defer = sig.ret.optional.is_some() && dest.is_some();
        let mut deferred = Vec::new();
        for (i, ev) in evs.iter().enumerate() {
            let Some(p) = sig.params.get(i) else {
                continue;
            };
            let c = &p.contract;
            let referent = ev.val.target().cloned();
            if let (InitMode::Initializes, Some(r)) = (c.init, &referent) {
                if defer {
                    deferred.push(r.clone());
                } else {
                    self.set_data(st, r, Data::Blob);
                }
            }
            if let (true, Some(r)) = (c.finalizes, &referent) {
                self.set_data(st, r, Data::Finalized);
            }
            if !c.out_props.is_empty() {
                let target = if c.ty.pointee().is_some() {
                    referent
                } else {
                    ev.src.clone().filter(|s| !s.opaque())
                };
                if let Some(t) = target {
                    let mut v = self.read_cell(st, &t, &c.ty);
                    for (k, p) in &c.out_props {
                        let a = match p {
                            PropValue::Atom(a) => Some(a.clone()),
                            PropValue::Any => None,
                        };
                        v.props.insert(k.clone(), a);
                    }
                    st.cells.insert(t, v);
                }
            }
        }
        let result = self.call_result(st, info, &evs, site)?;
        match dest {
            Some(d) => {
                let ordinary = result.val.sentinel.is_none();
                let at = self.store(st, d, result, span)?;
                if ordinary || at.is_none() {
                    for r in deferred {
                        self.set_data(st, &r, Data::Blob);
                    }
                }
            }
            None => {
                if annotated && sig.ret.is_owning() && result.val.owns.is_some() {
                    self.report(Code::OwnLeak, span, &format!("{callee}()"));
                }
            }
        }
        Ok(())
    }

    fn aliasing(&mut self, sig: &crusted::annotations::AnnotatedSignature, args: &[Arg], evs: &[Ev], texts: &[String]) {
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
                if let (Some(a), Some(b)) = (evs[i].val.target(), evs[j].val.target()) {
                    if a.overlaps(b) {
                        self.report(Code::ExclViolation, args[j].span, &texts[j]);
                    }
                }
            }
        }
    }

    fn call_result(
        &mut self,
        st: &mut St,
        info: &crusted::annotations::tables::FunctionInfo,
        evs: &[Ev],
        site: u32,
    ) -> R<Ev> {
        let sig = &info.signature;
        let rc = &sig.ret;
        let ty = rc.ty.clone();
        if !(sig.annotated || info.from_model) {
            let mut v = Val::of(self.fresh(&ty)?);
            v.tag = rc.nominal.clone();
            return Ok(Ev {
                val: v,
                src: None,
                strong: false,
                ty,
            });
        }
        let zero = info
            .alloc_size_args
            .iter()
            .any(|&i| evs.get(i).is_some_and(|e| e.val.data == Data::Int(0)));
        let sentinel = match rc.optional {
            Some(Sentinel::Null) if zero => true,
            Some(_) => self.choose(2)? == 0,
            None => false,
        };
        let mut v = if sentinel {
            match rc.optional {
                Some(Sentinel::Int(s)) => {
                    let mut v = Val::of(Data::Int(s));
                    v.sentinel = rc.optional;
                    v
                }
                _ => {
                    let mut v = null_value();
                    v.konst = false;
                    v
                }
            }
        } else {
            let mut v = Val::of(Data::Blob);
            if rc.is_owning() {
                v.owns = Some(Res {
                    site,
                    class: rc.resource_class.clone().unwrap_or_else(|| "resource".to_string()),
                });
            }
            v.data = match ty.pointee() {
                Some(_) if rc.is_owning() => {
                    let contents = if rc.init == InitMode::MayBeUninit {
                        Data::Uninit
                    } else {
                        Data::Blob
                    };
                    st.cells.insert(Obj::Heap(site), Val::of(contents));
                    Data::Ptr(Some(Obj::Heap(site)))
                }
                Some(_) => Data::Ptr(Some(Obj::Unknown)),
                None if ty.is_scalar_number() && ty.ty != CType::Double => {
                    Data::Int(self.pick_int(&rc.ordinary_values())?)
                }
                None => self.fresh(&ty)?,
            };
            v
        };
        v.tag = rc.nominal.clone();
        Ok(Ev {
            val: v,
            src: None,
            strong: false,
            ty,
        })
    }
}
