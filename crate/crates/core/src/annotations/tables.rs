//! Typedef-chain flattening, nominal-type tables and effective function
//! contracts.

use std::collections::{BTreeMap, BTreeSet};

use super::types::{base_from_keywords, builtin_typedef, CType, IntKind, QualType};
use super::{Annotation, AnnotationKind, PropAssign, PropValue, Sentinel, Site};
use crate::diagnostics::{Code, Diagnostic};
use crate::domains::interval::MultiInterval;
use crate::frontend::ast::*;
use crate::frontend::Library;
use crate::libmodels::{self, LibraryModel};
use crate::span::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Ownership {
    /// Not owning: the callee borrows, or the returned reference is not owned.
    #[default]
    Borrow,
    /// Owning-in on a parameter, owning-out on a return type.
    Owning,
    /// An owning parameter that releases its resource.
    Release,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum InitMode {
    #[default]
    RequiresInit,
    Initializes,
    MayBeUninit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RefKind {
    Shared,
    Exclusive,
}

/// The resolved contract of one parameter, return type or typedef.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contract {
    pub ty: QualType,
    /// Root of the nominal typedef chain (the nearest typedef marked e_type).
    pub nominal: Option<String>,
    pub optional: Option<Sentinel>,
    pub ownership: Ownership,
    /// `Some(true)` for e_hown, `Some(false)` for e_own.
    pub heap: Option<bool>,
    pub resource_class: Option<String>,
    pub init: InitMode,
    pub ref_kind: Option<RefKind>,
    /// Intersection of the e_val predicates along the typedef chain.
    pub value: Option<MultiInterval>,
    pub in_props: BTreeMap<String, PropValue>,
    pub out_props: BTreeMap<String, PropValue>,
    /// e_fini on a parameter: the callee finalizes the referent.
    pub finalizes: bool,
}

impl Contract {
    pub fn of_type(ty: QualType) -> Self {
        Contract {
            ty,
            nominal: None,
            optional: None,
            ownership: Ownership::Borrow,
            heap: None,
            resource_class: None,
            init: InitMode::RequiresInit,
            ref_kind: None,
            value: None,
            in_props: BTreeMap::new(),
            out_props: BTreeMap::new(),
            finalizes: false,
        }
    }

    pub fn is_owning(&self) -> bool {
        self.ownership != Ownership::Borrow
    }

    /// True when the contract says nothing beyond the bare C type.
    pub fn is_default(&self) -> bool {
        *self == Contract::of_type(self.ty.clone())
    }

    /// Combines two contracts for the same site. Restating a fact is fine;
    /// contradictions are reported as text.
    pub fn merge(&self, other: &Contract) -> Result<Contract, String> {
        let mut c = self.clone();
        match (&self.optional, &other.optional) {
            (Some(a), Some(b)) if a != b => {
                return Err(format!("optional values {a} and {b}"));
            }
            (None, Some(b)) => c.optional = Some(*b),
            _ => {}
        }
        match (self.heap, other.heap) {
            (Some(a), Some(b)) if a != b => return Err("e_hown and e_own".into()),
            (None, Some(b)) => c.heap = Some(b),
            _ => {}
        }
        c.ownership = self.ownership.max(other.ownership);
        c.init = match (self.init, other.init) {
            (a, InitMode::RequiresInit) => a,
            (InitMode::RequiresInit, b) => b,
            (a, b) if a == b => a,
            _ => return Err("e_init and e_uninit".into()),
        };
        if c.init == InitMode::Initializes && c.ownership == Ownership::Release {
            return Err("e_init and e_release".into());
        }
        match (self.ref_kind, other.ref_kind) {
            (Some(a), Some(b)) if a != b => return Err("e_shar and e_excl".into()),
            (None, Some(b)) => c.ref_kind = Some(b),
            _ => {}
        }
        c.value = match (&self.value, &other.value) {
            (Some(a), Some(b)) => {
                let m = a.meet(b);
                if m.is_bottom() {
                    return Err(format!("disjoint value sets {a} and {b}"));
                }
                Some(m)
            }
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        for (dst, src, what) in [
            (&mut c.in_props, &other.in_props, "e_in"),
            (&mut c.out_props, &other.out_props, "e_out"),
        ] {
            for (k, v) in src {
                match dst.get(k) {
                    Some(old) if old != v => return Err(format!("{what} gives '{k}' both {old} and {v}")),
                    _ => {
                        dst.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        match (&self.nominal, &other.nominal) {
            (Some(a), Some(b)) if a != b => return Err(format!("nominal types '{a}' and '{b}'")),
            (None, Some(b)) => c.nominal = Some(b.clone()),
            _ => {}
        }
        c.finalizes |= other.finalizes;
        if c.resource_class.is_none() {
            c.resource_class = other.resource_class.clone();
        }
        Ok(c)
    }

    /// The set of ordinary (non-sentinel) values.
    pub fn ordinary_values(&self) -> MultiInterval {
        let base = self.ty.value_range();
        match &self.value {
            Some(v) => base.meet(v),
            None => base,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSig {
    pub name: String,
    pub contract: Contract,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSignature {
    pub name: String,
    pub params: Vec<ParamSig>,
    pub ret: Contract,
    /// Unsafety kinds from e_unsafe in return-type position.
    pub unsafe_kinds: BTreeSet<String>,
    /// False when neither the declaration nor any typedef it uses carries
    /// an annotation.
    pub annotated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedefInfo {
    pub name: String,
    /// The defining type, spelled with the parent typedef name if any.
    pub ty: QualType,
    pub parent: Option<String>,
    pub is_nominal: bool,
    /// Flattened contract for values of this type.
    pub contract: Contract,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeProps {
    pub fini_required: bool,
    pub unsafe_kinds: BTreeSet<String>,
}

impl TypeProps {
    fn absorb(&mut self, other: &TypeProps) {
        self.fini_required |= other.fini_required;
        self.unsafe_kinds.extend(other.unsafe_kinds.iter().cloned());
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NominalInfo {
    pub underlying: QualType,
    pub value: Option<MultiInterval>,
    pub parent: Option<String>,
    pub unsafe_kinds: BTreeSet<String>,
    pub fini_required: bool,
}

/// Nominal types and the operations declared on them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NominalTypeTable {
    pub types: BTreeMap<String, NominalInfo>,
    /// (operator, lhs root, rhs root) to result; `None` roots are plain.
    pub bops: BTreeMap<(String, Option<String>, Option<String>), Option<String>>,
    pub uops: BTreeMap<(String, Option<String>), Option<String>>,
}

impl NominalTypeTable {
    pub fn binary_result(&self, op: &str, lhs: Option<&str>, rhs: Option<&str>) -> Option<Option<String>> {
        self.bops
            .get(&(op.to_string(), lhs.map(str::to_string), rhs.map(str::to_string)))
            .cloned()
    }

    pub fn unary_result(&self, op: &str, operand: Option<&str>) -> Option<Option<String>> {
        self.uops.get(&(op.to_string(), operand.map(str::to_string))).cloned()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructInfo {
    pub members: Vec<(String, Contract)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionInfo {
    pub signature: AnnotatedSignature,
    /// Argument positions whose value is an allocation size.
    pub alloc_size_args: Vec<usize>,
    pub from_model: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tables {
    pub libraries: BTreeSet<Library>,
    pub typedefs: BTreeMap<String, TypedefInfo>,
    pub nominal: NominalTypeTable,
    /// Properties by typedef name or `struct Tag`.
    pub type_props: BTreeMap<String, TypeProps>,
    pub structs: BTreeMap<String, StructInfo>,
    pub functions: BTreeMap<String, FunctionInfo>,
    pub globals: BTreeMap<String, QualType>,
    pub enum_consts: BTreeMap<String, i64>,
}

fn conflict(span: Span, detail: impl Into<String>) -> Diagnostic {
    Diagnostic::detail(Code::AnnConflict, span, detail)
}

fn struct_key(ty: &CType) -> Option<String> {
    match ty {
        CType::Struct(tag) => Some(format!("struct {tag}")),
        _ => None,
    }
}

impl Tables {
    // ---- type resolution ------------------------------------------------

    pub fn typedef_chain(&self, name: &str) -> Vec<&TypedefInfo> {
        let mut out = Vec::new();
        let mut cur = self.typedefs.get(name);
        while let Some(info) = cur {
            out.push(info);
            cur = info.parent.as_deref().and_then(|p| self.typedefs.get(p));
        }
        out
    }

    /// Root nominal type of a typedef name, if any typedef in its chain is
    /// marked e_type.
    pub fn nominal_root(&self, name: &str) -> Option<String> {
        self.typedef_chain(name)
            .into_iter()
            .find(|t| t.is_nominal)
            .map(|t| t.name.clone())
    }

    /// Nominal root of a value of this type.
    pub fn nominal_of(&self, ty: &QualType) -> Option<String> {
        ty.typedef.as_deref().and_then(|n| self.nominal_root(n))
    }

    /// Merged properties of a type: its typedef chain and struct tag.
    pub fn props_of(&self, ty: &QualType) -> TypeProps {
        let mut props = TypeProps::default();
        if let Some(name) = &ty.typedef {
            for t in self.typedef_chain(name) {
                if let Some(p) = self.type_props.get(&t.name) {
                    props.absorb(p);
                }
            }
        }
        if let Some(p) = struct_key(&ty.ty).and_then(|k| self.type_props.get(&k)) {
            props.absorb(p);
        }
        props
    }

    fn resolve_specs(&self, specs: &DeclSpecs, diags: &mut Vec<Diagnostic>) -> QualType {
        let mut words = Vec::new();
        let mut resolved: Option<QualType> = None;
        for item in &specs.items {
            match item {
                SpecItem::TypeKeyword(k, _) => words.push(k.as_str()),
                SpecItem::TypedefName(id) => {
                    resolved = Some(match builtin_typedef(&id.name) {
                        Some(t) => QualType::plain(t).named(&id.name),
                        None => match self.typedefs.get(&id.name) {
                            Some(info) => {
                                let mut q = info.ty.clone();
                                q.typedef = Some(id.name.clone());
                                q
                            }
                            None => {
                                diags.push(Diagnostic::detail(
                                    Code::Parse,
                                    id.span,
                                    format!("unknown type name '{}'; is its header included?", id.name),
                                ));
                                QualType::int(IntKind::Int)
                            }
                        },
                    })
                }
                SpecItem::Struct(s) => {
                    let tag = s
                        .name
                        .as_ref()
                        .map(|n| n.name.clone())
                        .unwrap_or_else(|| format!("<anonymous@{}>", s.span.offset));
                    resolved = Some(QualType::plain(CType::Struct(tag)));
                }
                SpecItem::Enum(e) => {
                    let tag = e
                        .name
                        .as_ref()
                        .map(|n| n.name.clone())
                        .unwrap_or_else(|| "<anonymous>".to_string());
                    resolved = Some(QualType::plain(CType::Enum(tag)));
                }
                _ => {}
            }
        }
        let mut q = match resolved {
            Some(q) if words.is_empty() => q,
            Some(q) => {
                diags.push(Diagnostic::detail(
                    Code::Parse,
                    specs.span,
                    "conflicting type specifiers",
                ));
                q
            }
            None => match base_from_keywords(&words) {
                Some(t) => QualType::plain(t),
                None => {
                    diags.push(Diagnostic::detail(
                        Code::Parse,
                        specs.span,
                        format!("invalid type specifier combination '{}'", words.join(" ")),
                    ));
                    QualType::int(IntKind::Int)
                }
            },
        };
        if specs.is_const() {
            q.is_const = true;
        }
        q
    }

    fn apply_pointers(base: QualType, pointers: &[PointerLevel]) -> QualType {
        let mut q = base;
        for level in pointers {
            q = QualType {
                ty: CType::Pointer(Box::new(q)),
                is_const: level.is_const(),
                typedef: None,
            };
        }
        q
    }

    /// The type declared by specifiers plus a declarator (ignoring any
    /// function suffix, which yields the return type).
    pub fn declared_type(&self, specs: &DeclSpecs, declarator: &Declarator, diags: &mut Vec<Diagnostic>) -> QualType {
        let base = self.resolve_specs(specs, diags);
        let q = Self::apply_pointers(base, &declarator.pointers);
        match &declarator.suffix {
            DeclSuffix::Array(_) => QualType::plain(CType::Array(Box::new(q))),
            _ => q,
        }
    }

    pub fn type_name(&self, ty: &TypeName, diags: &mut Vec<Diagnostic>) -> QualType {
        let base = self.resolve_specs(&ty.specs, diags);
        Self::apply_pointers(base, &ty.pointers)
    }

    // ---- contracts --------------------------------------------------------

    /// The contract implied by written annotations alone. Duplicates and
    /// annotations that make no sense at the site are reported.
    fn written_contract(
        &self,
        ty: &QualType,
        anns: &[&Annotation],
        site: Site,
        diags: &mut Vec<Diagnostic>,
    ) -> Contract {
        let mut c = Contract::of_type(ty.clone());
        let mut seen: Vec<&str> = Vec::new();
        for a in anns {
            let name = a.kind.name();
            if seen.contains(&name) {
                diags.push(conflict(a.span, format!("duplicate '{name}'")));
                continue;
            }
            seen.push(name);
            let mut piece = Contract::of_type(ty.clone());
            match &a.kind {
                AnnotationKind::Hown => {
                    piece.ownership = Ownership::Owning;
                    piece.heap = Some(true);
                }
                AnnotationKind::Own => {
                    piece.ownership = Ownership::Owning;
                    piece.heap = Some(false);
                }
                AnnotationKind::OptHown => {
                    piece.ownership = Ownership::Owning;
                    piece.heap = Some(true);
                    piece.optional = Some(Sentinel::Null);
                }
                AnnotationKind::Opt(s) => {
                    let ok = match s {
                        Sentinel::Null => ty.is_pointer(),
                        Sentinel::Int(_) => ty.is_scalar_number(),
                    };
                    if !ok {
                        diags.push(Diagnostic::detail(
                            Code::AnnArg,
                            a.span,
                            format!("sentinel {s} is not a value of type '{ty}'"),
                        ));
                        continue;
                    }
                    piece.optional = Some(*s);
                }
                AnnotationKind::Excl => piece.ref_kind = Some(RefKind::Exclusive),
                AnnotationKind::Shar => piece.ref_kind = Some(RefKind::Shared),
                AnnotationKind::Val(p) => {
                    if ty.is_pointer() {
                        diags.push(conflict(a.span, "e_val on a pointer type"));
                        continue;
                    }
                    piece.value = Some(MultiInterval::from_predicate(p));
                }
                AnnotationKind::Init => piece.init = InitMode::Initializes,
                AnnotationKind::Uninit => piece.init = InitMode::MayBeUninit,
                AnnotationKind::Release => piece.ownership = Ownership::Release,
                AnnotationKind::Fini => {
                    if site == Site::Parameter {
                        piece.finalizes = true;
                    }
                }
                AnnotationKind::In(list) | AnnotationKind::Out(list) => {
                    if site != Site::Parameter || !ty.is_pointer() {
                        diags.push(conflict(
                            a.span,
                            format!("'{name}' applies only to reference parameters"),
                        ));
                        continue;
                    }
                    let map: BTreeMap<String, PropValue> = list
                        .iter()
                        .map(|PropAssign { key, value }| (key.clone(), value.clone()))
                        .collect();
                    if map.len() != list.len() {
                        diags.push(conflict(a.span, format!("repeated key in '{name}'")));
                    }
                    if matches!(a.kind, AnnotationKind::In(_)) {
                        piece.in_props = map;
                    } else {
                        piece.out_props = map;
                    }
                }
                AnnotationKind::Type | AnnotationKind::Unsafe(_) => {}
                AnnotationKind::Checked(_)
                | AnnotationKind::Unchecked(_)
                | AnnotationKind::Bop { .. }
                | AnnotationKind::Uop { .. }
                | AnnotationKind::DeclProps { .. } => {
                    diags.push(conflict(a.span, format!("'{name}' is not valid here")));
                    continue;
                }
            }
            match c.merge(&piece) {
                Ok(m) => c = m,
                Err(e) => diags.push(conflict(a.span, e)),
            }
        }
        c
    }

    /// Contract inherited from the typedef a type is spelled with. Only
    /// applies when the declared entity is the typedef'd value itself.
    fn inherited_contract(&self, ty: &QualType) -> Contract {
        match ty.typedef.as_deref().and_then(|n| self.typedefs.get(n)) {
            Some(info) => {
                let mut c = info.contract.clone();
                c.ty = ty.clone();
                c
            }
            None => Contract::of_type(ty.clone()),
        }
    }

    fn finish_contract(&self, c: &mut Contract) {
        if c.nominal.is_none() {
            c.nominal = self.nominal_of(&c.ty);
        }
        if c.ownership == Ownership::Release && c.heap.is_none() {
            c.heap = Some(false);
        }
        c.resource_class = if c.is_owning() {
            Some(resource_class(self, c))
        } else {
            None
        };
    }

    /// Resolves a declared entity's full contract: the typedef chain plus
    /// what is written at the site.
    fn site_contract(&self, ty: &QualType, anns: &[&Annotation], site: Site, diags: &mut Vec<Diagnostic>) -> Contract {
        let inherited = self.inherited_contract(ty);
        let written = self.written_contract(ty, anns, site, diags);
        let mut c = match inherited.merge(&written) {
            Ok(c) => c,
            Err(e) => {
                let span = anns.first().map(|a| a.span).unwrap_or_default();
                diags.push(conflict(span, format!("contradicts inherited contract: {e}")));
                written
            }
        };
        c.ty = ty.clone();
        self.finish_contract(&mut c);
        c
    }

    /// Contract of a local variable or struct member.
    pub fn object_contract(
        &self,
        ty: &QualType,
        anns: &[&Annotation],
        site: Site,
        diags: &mut Vec<Diagnostic>,
    ) -> Contract {
        self.site_contract(ty, anns, site, diags)
    }

    fn param_contract(&self, param: &Param, diags: &mut Vec<Diagnostic>) -> Contract {
        let ty = self.declared_type(&param.specs, &param.declarator, diags);
        let anns = param.annotations();
        let explicit_ref = anns
            .iter()
            .find(|a| matches!(a.kind, AnnotationKind::Shar | AnnotationKind::Excl));
        let mut c = self.site_contract(&ty, &anns, Site::Parameter, diags);
        if let Some(pointee) = ty.pointee() {
            let inferred = if pointee.is_const {
                RefKind::Shared
            } else {
                RefKind::Exclusive
            };
            match explicit_ref {
                Some(a) if c.ref_kind == Some(inferred) => diags.push(Diagnostic::new(
                    Code::AnnRedundant,
                    a.span,
                    [("annotation", a.kind.name())],
                )),
                Some(_) => {}
                None => c.ref_kind = Some(inferred),
            }
        }
        c
    }

    /// Effective contract of one parameter declaration.
    pub fn effective_parameter_contract(&self, param: &Param, diags: &mut Vec<Diagnostic>) -> Contract {
        self.param_contract(param, diags)
    }

    /// Resolves a function declarator into a signature.
    pub fn signature(
        &self,
        specs: &DeclSpecs,
        declarator: &Declarator,
        diags: &mut Vec<Diagnostic>,
    ) -> AnnotatedSignature {
        let ret_ty = Self::apply_pointers(self.resolve_specs(specs, diags), &declarator.pointers);
        let mut ret_anns: Vec<&Annotation> = Vec::new();
        let mut unsafe_kinds = BTreeSet::new();
        for a in specs.annotations().chain(declarator.annotations()) {
            match &a.kind {
                AnnotationKind::Unsafe(k) => {
                    unsafe_kinds.insert(k.clone());
                }
                AnnotationKind::Init
                | AnnotationKind::Fini
                | AnnotationKind::Release
                | AnnotationKind::In(_)
                | AnnotationKind::Out(_)
                | AnnotationKind::Type => diags.push(conflict(
                    a.span,
                    format!("'{}' cannot annotate a return type", a.kind.name()),
                )),
                _ => ret_anns.push(a),
            }
        }
        let mut ret = self.site_contract(&ret_ty, &ret_anns, Site::ReturnType, diags);
        if ret.is_owning() && ret.ref_kind.is_none() && ret_ty.is_pointer() {
            ret.ref_kind = Some(RefKind::Exclusive);
        }
        let mut written = !ret_anns.is_empty() || !unsafe_kinds.is_empty();
        let mut inherited = !self.inherited_contract(&ret_ty).is_default();
        let mut params = Vec::new();
        for p in declarator.params().unwrap_or(&[]) {
            let contract = self.param_contract(p, diags);
            written |= !p.annotations().is_empty();
            inherited |= !self.inherited_contract(&contract.ty).is_default();
            params.push(ParamSig {
                name: p.declarator.name().to_string(),
                contract,
            });
        }
        AnnotatedSignature {
            name: declarator.name().to_string(),
            params,
            ret,
            unsafe_kinds,
            annotated: written || inherited,
        }
    }

    pub fn function(&self, name: &str) -> Option<&FunctionInfo> {
        self.functions.get(name)
    }
}

/// Human-readable class of the resource an owning contract refers to.
fn resource_class(tables: &Tables, c: &Contract) -> String {
    if c.heap == Some(true) {
        return "heap-block".to_string();
    }
    let mut names: Vec<String> = Vec::new();
    if let Some(n) = &c.nominal {
        names.push(n.clone());
    }
    if let Some(t) = &c.ty.typedef {
        names.extend(tables.typedef_chain(t).iter().map(|i| i.name.clone()));
    }
    if let Some(p) = c.ty.pointee() {
        if let Some(t) = &p.typedef {
            names.push(t.clone());
        }
        if let CType::Struct(tag) = &p.ty {
            names.push(tag.clone());
        }
    }
    for n in &names {
        if let Some(class) = libmodels::resource_class_for_type(n) {
            return class.to_string();
        }
    }
    match names.first() {
        Some(n) => format!("{n} resource"),
        None => "resource".to_string(),
    }
}

// ---- building ---------------------------------------------------------------

fn annotation_site_type_ok(tables: &Tables, name: &str) -> bool {
    builtin_typedef(name).is_some() || tables.typedefs.contains_key(name) || base_from_keywords(&[name]).is_some()
}

fn eval_const(tables: &Tables, e: &Expr) -> Option<i64> {
    match &e.kind {
        ExprKind::IntLit { value, .. } | ExprKind::CharLit { value, .. } => Some(*value),
        ExprKind::Paren(inner) => eval_const(tables, inner),
        ExprKind::Unary {
            op: UnaryOp::Neg,
            operand,
        } => eval_const(tables, operand).map(|v| -v),
        ExprKind::Ident(n) => tables
            .enum_consts
            .get(n)
            .copied()
            .or(match crate::frontend::named_constant(n) {
                Some(crate::frontend::NamedConstant::Int(v)) => Some(v),
                _ => None,
            }),
        _ => None,
    }
}

impl Tables {
    fn add_model_library(&mut self, models: &LibraryModel, lib: Library) {
        for t in models.typedefs.iter().filter(|t| t.library == lib) {
            self.typedefs.insert(t.info.name.clone(), t.info.clone());
            if t.info.is_nominal {
                self.nominal.types.insert(
                    t.info.name.clone(),
                    NominalInfo {
                        underlying: t.info.ty.clone(),
                        value: t.info.contract.value.clone(),
                        parent: t.info.parent.clone(),
                        unsafe_kinds: BTreeSet::new(),
                        fini_required: false,
                    },
                );
            }
        }
        for (key, props) in models.type_props.iter().filter(|(_, (l, _))| *l == lib) {
            self.type_props.entry(key.clone()).or_default().absorb(&props.1);
        }
        for (name, (l, ty)) in &models.globals {
            if *l == lib {
                self.globals.insert(name.clone(), ty.clone());
            }
        }
        for f in models.functions.values().filter(|f| f.library == lib) {
            self.functions.insert(
                f.signature.name.clone(),
                FunctionInfo {
                    signature: f.signature.clone(),
                    alloc_size_args: f.alloc_size_args.clone(),
                    from_model: true,
                },
            );
        }
    }

    fn add_typedef(&mut self, d: &Declaration, diags: &mut Vec<Diagnostic>) {
        let spec_anns: Vec<&Annotation> = d.specs.annotations().collect();
        for id in &d.declarators {
            let decl = &id.declarator;
            let name = decl.name().to_string();
            let ty = self.declared_type(&d.specs, decl, diags);
            let direct = decl.pointers.is_empty() && matches!(decl.suffix, DeclSuffix::None);
            let mut anns: Vec<&Annotation> = spec_anns.clone();
            anns.extend(decl.annotations());
            let is_nominal = anns.iter().any(|a| a.kind == AnnotationKind::Type);
            let mut props = TypeProps::default();
            let mut contract_anns = Vec::new();
            for a in anns {
                match &a.kind {
                    AnnotationKind::Fini => props.fini_required = true,
                    AnnotationKind::Unsafe(k) => {
                        props.unsafe_kinds.insert(k.clone());
                    }
                    _ => contract_anns.push(a),
                }
            }
            let parent = if direct { ty.typedef.clone() } else { None };
            let inherited = if direct {
                self.inherited_contract(&ty)
            } else {
                Contract::of_type(ty.clone())
            };
            let written = self.written_contract(&ty, &contract_anns, Site::Typedef, diags);
            let mut contract = match inherited.merge(&written) {
                Ok(c) => c,
                Err(e) => {
                    diags.push(conflict(d.span, format!("contradicts parent type: {e}")));
                    written
                }
            };
            contract.ty = ty.clone();
            contract.nominal = if is_nominal {
                Some(name.clone())
            } else if direct {
                contract.nominal
            } else {
                None
            };
            let info = TypedefInfo {
                name: name.clone(),
                ty: ty.clone(),
                parent: parent.clone(),
                is_nominal,
                contract,
            };
            if let Some(old) = self.typedefs.get(&name) {
                let annotated =
                    is_nominal || !info.contract.is_default() || old.is_nominal || !old.contract.is_default();
                if annotated || old.ty != info.ty {
                    diags.push(conflict(decl.span, format!("typedef '{name}' redefined")));
                }
                continue;
            }
            let mut info = info;
            self.finish_contract(&mut info.contract);
            if is_nominal {
                self.nominal.types.insert(
                    name.clone(),
                    NominalInfo {
                        underlying: ty.clone(),
                        value: info.contract.value.clone(),
                        parent,
                        unsafe_kinds: props.unsafe_kinds.clone(),
                        fini_required: props.fini_required,
                    },
                );
            }
            if props != TypeProps::default() {
                self.type_props.entry(name.clone()).or_default().absorb(&props);
            }
            self.typedefs.insert(name, info);
        }
        self.add_tags(&d.specs, diags);
    }

    fn add_tags(&mut self, specs: &DeclSpecs, diags: &mut Vec<Diagnostic>) {
        for item in &specs.items {
            match item {
                SpecItem::Struct(s) => {
                    let Some(members) = &s.members else { continue };
                    let key = match &s.name {
                        Some(n) => n.name.clone(),
                        None => format!("<anonymous@{}>", s.span.offset),
                    };
                    let mut list = Vec::new();
                    for m in members {
                        let anns: Vec<&Annotation> = m.specs.annotations().collect();
                        for id in &m.declarators {
                            let ty = self.declared_type(&m.specs, &id.declarator, diags);
                            let mut all = anns.clone();
                            all.extend(id.declarator.annotations());
                            let c = self.site_contract(&ty, &all, Site::StructMember, diags);
                            list.push((id.declarator.name().to_string(), c));
                        }
                    }
                    if self.structs.contains_key(&key) {
                        diags.push(Diagnostic::detail(
                            Code::Parse,
                            s.span,
                            format!("redefinition of 'struct {key}'"),
                        ));
                    }
                    self.structs.insert(key, StructInfo { members: list });
                }
                SpecItem::Enum(e) => {
                    let mut next = 0i64;
                    for en in e.enumerators.iter().flatten() {
                        if let Some(v) = &en.value {
                            match eval_const(self, v) {
                                Some(v) => next = v,
                                None => diags.push(Diagnostic::detail(
                                    Code::Parse,
                                    v.span,
                                    "enumerator value is not an integer constant",
                                )),
                            }
                        }
                        self.enum_consts.insert(en.name.name.clone(), next);
                        next += 1;
                    }
                }
                _ => {}
            }
        }
        let tag_anns: Vec<&Annotation> = specs.annotations().filter(|a| a.site == Site::StructType).collect();
        if !tag_anns.is_empty() {
            let key = specs.items.iter().find_map(|i| match i {
                SpecItem::Struct(StructSpec { name: Some(n), .. }) => Some(format!("struct {}", n.name)),
                _ => None,
            });
            for a in tag_anns {
                let entry = match &key {
                    Some(k) => self.type_props.entry(k.clone()).or_default(),
                    None => {
                        diags.push(conflict(a.span, "annotation on an anonymous struct declaration"));
                        continue;
                    }
                };
                match &a.kind {
                    AnnotationKind::Fini => entry.fini_required = true,
                    AnnotationKind::Unsafe(k) => {
                        entry.unsafe_kinds.insert(k.clone());
                    }
                    other => diags.push(conflict(
                        a.span,
                        format!("'{}' cannot annotate a struct type", other.name()),
                    )),
                }
            }
        }
    }

    fn root_for_op(&self, name: &str, span: Span, diags: &mut Vec<Diagnostic>) -> Option<Option<String>> {
        if !annotation_site_type_ok(self, name) {
            diags.push(Diagnostic::new(Code::AnnUnknownType, span, [("type", name)]));
            return None;
        }
        Some(self.nominal_root(name))
    }

    fn add_global_annotation(&mut self, a: &Annotation, diags: &mut Vec<Diagnostic>) {
        match &a.kind {
            AnnotationKind::Bop { result, lhs, op, rhs } => {
                let (Some(r), Some(l), Some(x)) = (
                    self.root_for_op(result, a.span, diags),
                    self.root_for_op(lhs, a.span, diags),
                    self.root_for_op(rhs, a.span, diags),
                ) else {
                    return;
                };
                if BinaryOp::from_symbol(op).is_none() {
                    diags.push(Diagnostic::detail(
                        Code::AnnArg,
                        a.span,
                        format!("'{op}' is not a binary operator"),
                    ));
                    return;
                }
                let key = (op.clone(), l, x);
                match self.nominal.bops.get(&key) {
                    Some(old) if *old != r => diags.push(conflict(
                        a.span,
                        format!("operator '{op}' already declared with another result type"),
                    )),
                    _ => {
                        self.nominal.bops.insert(key, r);
                    }
                }
            }
            AnnotationKind::Uop { result, op, operand } => {
                let (Some(r), Some(o)) = (
                    self.root_for_op(result, a.span, diags),
                    self.root_for_op(operand, a.span, diags),
                ) else {
                    return;
                };
                if !matches!(op.as_str(), "-" | "+" | "!" | "~" | "++" | "--") {
                    diags.push(Diagnostic::detail(
                        Code::AnnArg,
                        a.span,
                        format!("'{op}' is not a unary operator"),
                    ));
                    return;
                }
                let key = (op.clone(), o);
                match self.nominal.uops.get(&key) {
                    Some(old) if *old != r => diags.push(conflict(
                        a.span,
                        format!("operator '{op}' already declared with another result type"),
                    )),
                    _ => {
                        self.nominal.uops.insert(key, r);
                    }
                }
            }
            AnnotationKind::DeclProps { type_name, annotations } => {
                if !self.typedefs.contains_key(type_name) && builtin_typedef(type_name).is_none() {
                    diags.push(Diagnostic::new(
                        Code::AnnUnknownType,
                        a.span,
                        [("type", type_name.as_str())],
                    ));
                    return;
                }
                let mut props = TypeProps::default();
                for inner in annotations {
                    match &inner.kind {
                        AnnotationKind::Unsafe(k) => {
                            props.unsafe_kinds.insert(k.clone());
                        }
                        AnnotationKind::Fini => props.fini_required = true,
                        other => diags.push(conflict(
                            inner.span,
                            format!("'{}' cannot be attached with e_declprops", other.name()),
                        )),
                    }
                }
                if let Some(n) = self.nominal.types.get_mut(type_name) {
                    n.unsafe_kinds.extend(props.unsafe_kinds.iter().cloned());
                    n.fini_required |= props.fini_required;
                }
                self.type_props.entry(type_name.clone()).or_default().absorb(&props);
            }
            _ => diags.push(conflict(a.span, "not a file-scope annotation")),
        }
    }

    fn add_function(&mut self, specs: &DeclSpecs, declarator: &Declarator, span: Span, diags: &mut Vec<Diagnostic>) {
        let sig = self.signature(specs, declarator, diags);
        let name = sig.name.clone();
        match self.functions.get(&name) {
            Some(old) if old.from_model => {
                if sig.annotated && !signatures_agree(&old.signature, &sig) {
                    diags.push(Diagnostic::new(
                        Code::ModelConflict,
                        declarator.name.as_ref().map(|n| n.span).unwrap_or(span),
                        [("name", name.as_str())],
                    ));
                    self.functions.insert(
                        name,
                        FunctionInfo {
                            signature: sig,
                            alloc_size_args: Vec::new(),
                            from_model: false,
                        },
                    );
                }
            }
            Some(old) => {
                if !signatures_agree(&old.signature, &sig) {
                    if sig.annotated || old.signature.annotated {
                        diags.push(conflict(
                            declarator.name.as_ref().map(|n| n.span).unwrap_or(span),
                            format!("declaration of '{name}' disagrees with an earlier one"),
                        ));
                    }
                    if sig.annotated && !old.signature.annotated {
                        self.functions.insert(
                            name,
                            FunctionInfo {
                                signature: sig,
                                alloc_size_args: Vec::new(),
                                from_model: false,
                            },
                        );
                    }
                }
            }
            None => {
                self.functions.insert(
                    name,
                    FunctionInfo {
                        signature: sig,
                        alloc_size_args: Vec::new(),
                        from_model: false,
                    },
                );
            }
        }
    }
}

impl Tables {
    /// Adds every declaration of a unit. Library models are not consulted.
    pub(crate) fn add_unit(&mut self, tu: &TranslationUnit, diags: &mut Vec<Diagnostic>) {
        for item in &tu.items {
            match &item.kind {
                ItemKind::Include(_) => {}
                ItemKind::Typedef(d) => self.add_typedef(d, diags),
                ItemKind::TagDefinition(specs) => self.add_tags(specs, diags),
                ItemKind::GlobalAnnotation(a) => self.add_global_annotation(a, diags),
                ItemKind::FunctionDecl(d) => {
                    self.add_tags(&d.specs, diags);
                    for id in &d.declarators {
                        self.add_function(&d.specs, &id.declarator, d.span, diags);
                    }
                }
                ItemKind::FunctionDef(f) => {
                    self.add_tags(&f.specs, diags);
                    self.add_function(&f.specs, &f.declarator, f.span, diags);
                }
                ItemKind::GlobalVar(d) => {
                    self.add_tags(&d.specs, diags);
                    for id in &d.declarators {
                        let ty = self.declared_type(&d.specs, &id.declarator, diags);
                        self.globals.insert(id.declarator.name().to_string(), ty);
                    }
                }
            }
        }
    }
}

/// Signatures agree when their contracts match; parameter names and
/// typedef spellings of equal types do not matter.
pub fn signatures_agree(a: &AnnotatedSignature, b: &AnnotatedSignature) -> bool {
    fn norm(c: &Contract) -> Contract {
        let mut c = c.clone();
        c.ty = strip_names(&c.ty);
        c
    }
    a.params.len() == b.params.len()
        && norm(&a.ret) == norm(&b.ret)
        && a.unsafe_kinds == b.unsafe_kinds
        && a.params
            .iter()
            .zip(&b.params)
            .all(|(x, y)| norm(&x.contract) == norm(&y.contract))
}

fn strip_names(q: &QualType) -> QualType {
    QualType {
        ty: match &q.ty {
            CType::Pointer(p) => CType::Pointer(Box::new(strip_names(p))),
            CType::Array(p) => CType::Array(Box::new(strip_names(p))),
            t => t.clone(),
        },
        is_const: q.is_const,
        typedef: None,
    }
}

/// Builds the annotation tables for a translation unit whose includes have
/// been resolved. Library models for the recognized headers are loaded
/// first, so user declarations are checked against them.
pub fn build_annotation_tables(tu: &TranslationUnit, libraries: &BTreeSet<Library>) -> (Tables, Vec<Diagnostic>) {
    let mut tables = Tables {
        libraries: libraries.clone(),
        ..Tables::default()
    };
    let mut diags = Vec::new();
    let models = libmodels::builtin_models();
    for lib in libraries {
        tables.add_model_library(models, *lib);
    }
    tables.add_unit(tu, &mut diags);
    (tables, diags)
}

/// Resolves a parameter declaration against built tables.
pub fn effective_parameter_contract(param: &Param, tables: &Tables) -> (Contract, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let c = tables.effective_parameter_contract(param, &mut diags);
    (c, diags)
}
