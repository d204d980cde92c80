//! Resolved C types.

use std::fmt;

use crate::domains::interval::{MultiInterval, NEG_INF, POS_INF};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntKind {
    Bool,
    Char,
    UChar,
    Short,
    UShort,
    Int,
    UInt,
    Long,
    ULong,
    SizeT,
    SsizeT,
}

impl IntKind {
    /// The value range of the type. 64-bit unsigned maxima exceed the
    /// domain's finite bounds and are represented as +inf.
    pub fn range(self) -> MultiInterval {
        let (lo, hi) = match self {
            IntKind::Bool => (0, 1),
            IntKind::Char => (i8::MIN as i64, i8::MAX as i64),
            IntKind::UChar => (0, u8::MAX as i64),
            IntKind::Short => (i16::MIN as i64, i16::MAX as i64),
            IntKind::UShort => (0, u16::MAX as i64),
            IntKind::Int => (i32::MIN as i64, i32::MAX as i64),
            IntKind::UInt => (0, u32::MAX as i64),
            IntKind::Long | IntKind::SsizeT => (NEG_INF, POS_INF),
            IntKind::ULong | IntKind::SizeT => (0, POS_INF),
        };
        MultiInterval::range(lo, hi)
    }

    pub fn is_unsigned(self) -> bool {
        matches!(
            self,
            IntKind::Bool | IntKind::UChar | IntKind::UShort | IntKind::UInt | IntKind::ULong | IntKind::SizeT
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            IntKind::Bool => "bool",
            IntKind::Char => "char",
            IntKind::UChar => "unsigned char",
            IntKind::Short => "short",
            IntKind::UShort => "unsigned short",
            IntKind::Int => "int",
            IntKind::UInt => "unsigned",
            IntKind::Long => "long",
            IntKind::ULong => "unsigned long",
            IntKind::SizeT => "size_t",
            IntKind::SsizeT => "ssize_t",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CType {
    Void,
    Int(IntKind),
    Double,
    /// Struct types are identified by tag, or by the typedef name for an
    /// anonymous struct.
    Struct(String),
    Enum(String),
    Pointer(Box<QualType>),
    Array(Box<QualType>),
}

/// A type with its `const` qualification and the typedef name it was
/// spelled with, if any.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualType {
    pub ty: CType,
    pub is_const: bool,
    pub typedef: Option<String>,
}

impl QualType {
    pub fn plain(ty: CType) -> Self {
        QualType {
            ty,
            is_const: false,
            typedef: None,
        }
    }

    pub fn int(k: IntKind) -> Self {
        QualType::plain(CType::Int(k))
    }

    pub fn pointer_to(pointee: QualType) -> Self {
        QualType::plain(CType::Pointer(Box::new(pointee)))
    }

    pub fn constant(mut self) -> Self {
        self.is_const = true;
        self
    }

    pub fn named(mut self, typedef: &str) -> Self {
        self.typedef = Some(typedef.to_string());
        self
    }

    pub fn pointee(&self) -> Option<&QualType> {
        match &self.ty {
            CType::Pointer(p) | CType::Array(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self.ty, CType::Pointer(_) | CType::Array(_))
    }

    pub fn is_scalar_number(&self) -> bool {
        matches!(self.ty, CType::Int(_) | CType::Double | CType::Enum(_))
    }

    /// The set of values representable by the type; pointers and aggregates
    /// are unconstrained.
    pub fn value_range(&self) -> MultiInterval {
        match &self.ty {
            CType::Int(k) => k.range(),
            CType::Enum(_) => IntKind::Int.range(),
            _ => MultiInterval::top(),
        }
    }
}

impl fmt::Display for QualType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = &self.typedef {
            if self.is_const {
                write!(f, "const ")?;
            }
            return f.write_str(t);
        }
        match &self.ty {
            CType::Pointer(p) | CType::Array(p) => {
                write!(f, "{p} *")?;
                if self.is_const {
                    write!(f, " const")?;
                }
                Ok(())
            }
            other => {
                if self.is_const {
                    write!(f, "const ")?;
                }
                match other {
                    CType::Void => f.write_str("void"),
                    CType::Int(k) => f.write_str(k.name()),
                    CType::Double => f.write_str("double"),
                    CType::Struct(s) => write!(f, "struct {s}"),
                    CType::Enum(e) => write!(f, "enum {e}"),
                    CType::Pointer(_) | CType::Array(_) => unreachable!(),
                }
            }
        }
    }
}

/// Interprets a multiset of basic type keywords (`unsigned long`, `char`,
/// ...). Returns `None` for invalid combinations.
pub fn base_from_keywords(words: &[&str]) -> Option<CType> {
    let count = |w: &str| words.iter().filter(|x| **x == w).count();
    let unsigned = count("unsigned");
    let signed = count("signed");
    if unsigned + signed > 1 {
        return None;
    }
    let rest: Vec<&str> = words
        .iter()
        .copied()
        .filter(|w| *w != "unsigned" && *w != "signed")
        .collect();
    let kind = match rest.as_slice() {
        ["void"] if unsigned + signed == 0 => return Some(CType::Void),
        ["double"] if unsigned + signed == 0 => return Some(CType::Double),
        ["float"] if unsigned + signed == 0 => return Some(CType::Double),
        ["long", "double"] | ["double", "long"] if unsigned + signed == 0 => return Some(CType::Double),
        ["_Bool"] | ["bool"] if unsigned + signed == 0 => IntKind::Bool,
        ["char"] if unsigned == 1 => IntKind::UChar,
        ["char"] => IntKind::Char,
        ["short"] | ["short", "int"] | ["int", "short"] if unsigned == 1 => IntKind::UShort,
        ["short"] | ["short", "int"] | ["int", "short"] => IntKind::Short,
        [] | ["int"] if unsigned == 1 => IntKind::UInt,
        [] if signed == 1 => IntKind::Int,
        ["int"] => IntKind::Int,
        r if !r.is_empty()
            && r.iter().all(|w| *w == "long" || *w == "int")
            && r.iter().filter(|w| **w == "int").count() <= 1
            && (1..=2).contains(&r.iter().filter(|w| **w == "long").count()) =>
        {
            if unsigned == 1 {
                IntKind::ULong
            } else {
                IntKind::Long
            }
        }
        _ => return None,
    };
    Some(CType::Int(kind))
}

/// Library integer typedefs that are always understood as base types.
pub fn builtin_typedef(name: &str) -> Option<CType> {
    match name {
        "size_t" => Some(CType::Int(IntKind::SizeT)),
        "ssize_t" => Some(CType::Int(IntKind::SsizeT)),
        _ => None,
    }
}
