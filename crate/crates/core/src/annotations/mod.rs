//! Annotation syntax, resolution into effective contracts, and the
//! compile-neutral header.

pub mod header;
pub mod registry;
pub mod tables;
pub mod types;

use std::fmt;

use crate::frontend::lexer::TokenKind;
use crate::span::Span;

pub use tables::{
    build_annotation_tables, effective_parameter_contract, AnnotatedSignature, Contract, InitMode, NominalTypeTable,
    Ownership, RefKind, Tables, TypedefInfo,
};

/// The distinguished value of an optional type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sentinel {
    Null,
    Int(i64),
}

impl fmt::Display for Sentinel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sentinel::Null => f.write_str("NULL"),
            Sentinel::Int(v) => write!(f, "{v}"),
        }
    }
}

/// Argument of `e_val(...)`. Bounds are integers; fractional constants are
/// rounded outward when parsed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ValuePredicate {
    Geq(i64),
    Range(i64, i64),
    Eq(i64),
    Or(Vec<ValuePredicate>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropValue {
    Atom(String),
    /// `?`: any value.
    Any,
}

impl fmt::Display for PropValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropValue::Atom(a) => f.write_str(a),
            PropValue::Any => f.write_str("?"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PropAssign {
    pub key: String,
    pub value: PropValue,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnnotationKind {
    Hown,
    Own,
    /// `e_opt_hown`, shorthand for `e_opt(NULL) e_hown`.
    OptHown,
    Opt(Sentinel),
    Excl,
    Shar,
    Type,
    Val(ValuePredicate),
    Bop {
        result: String,
        lhs: String,
        op: String,
        rhs: String,
    },
    Uop {
        result: String,
        op: String,
        operand: String,
    },
    Init,
    Uninit,
    Fini,
    Release,
    In(Vec<PropAssign>),
    Out(Vec<PropAssign>),
    Unsafe(String),
    Checked(String),
    Unchecked(String),
    DeclProps {
        type_name: String,
        annotations: Vec<Annotation>,
    },
}

impl AnnotationKind {
    pub fn name(&self) -> &'static str {
        match self {
            AnnotationKind::Hown => "e_hown",
            AnnotationKind::Own => "e_own",
            AnnotationKind::OptHown => "e_opt_hown",
            AnnotationKind::Opt(_) => "e_opt",
            AnnotationKind::Excl => "e_excl",
            AnnotationKind::Shar => "e_shar",
            AnnotationKind::Type => "e_type",
            AnnotationKind::Val(_) => "e_val",
            AnnotationKind::Bop { .. } => "e_bop",
            AnnotationKind::Uop { .. } => "e_uop",
            AnnotationKind::Init => "e_init",
            AnnotationKind::Uninit => "e_uninit",
            AnnotationKind::Fini => "e_fini",
            AnnotationKind::Release => "e_release",
            AnnotationKind::In(_) => "e_in",
            AnnotationKind::Out(_) => "e_out",
            AnnotationKind::Unsafe(_) => "e_unsafe",
            AnnotationKind::Checked(_) => "e_checked",
            AnnotationKind::Unchecked(_) => "e_unchecked",
            AnnotationKind::DeclProps { .. } => "e_declprops",
        }
    }
}

/// Where an annotation was written.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Site {
    ReturnType,
    Parameter,
    Typedef,
    StructMember,
    StructType,
    Statement,
    Global,
    Local,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub span: Span,
    pub site: Site,
    /// The tokens as written, used to print the annotation back.
    pub raw: Vec<(TokenKind, String)>,
}
