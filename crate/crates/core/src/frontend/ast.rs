//! Syntax tree for the supported C subset.
//!
//! The tree keeps specifiers, qualifiers and annotations in source order so
//! that it can be printed back to an equivalent token stream.

use crate::annotations::Annotation;
use crate::span::Span;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TranslationUnit {
    pub items: Vec<Item>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Item {
    pub kind: ItemKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ItemKind {
    Include(Include),
    /// A declaration whose specifiers contain `typedef`.
    Typedef(Declaration),
    /// `struct S { ... };` or `enum E { ... };` without declarators.
    TagDefinition(DeclSpecs),
    /// `e_bop(...);`, `e_uop(...);` or `e_declprops(...);`
    GlobalAnnotation(Annotation),
    FunctionDecl(Declaration),
    FunctionDef(FunctionDef),
    /// `extern` object declarations.
    GlobalVar(Declaration),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Include {
    pub header: String,
    /// `<...>` rather than `"..."`.
    pub system: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Storage {
    Typedef,
    Extern,
    Static,
    Inline,
}

impl Storage {
    pub fn as_str(self) -> &'static str {
        match self {
            Storage::Typedef => "typedef",
            Storage::Extern => "extern",
            Storage::Static => "static",
            Storage::Inline => "inline",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Qualifier {
    Const,
    Restrict,
    Volatile,
}

impl Qualifier {
    pub fn as_str(self) -> &'static str {
        match self {
            Qualifier::Const => "const",
            Qualifier::Restrict => "restrict",
            Qualifier::Volatile => "volatile",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpecItem {
    Storage(Storage, Span),
    Qualifier(Qualifier, Span),
    /// `int`, `unsigned`, `double`, `void`, ...
    TypeKeyword(String, Span),
    TypedefName(Ident),
    Struct(StructSpec),
    Enum(EnumSpec),
    Annotation(Annotation),
}

impl SpecItem {
    pub fn span(&self) -> Span {
        match self {
            SpecItem::Storage(_, s) | SpecItem::Qualifier(_, s) | SpecItem::TypeKeyword(_, s) => *s,
            SpecItem::TypedefName(id) => id.span,
            SpecItem::Struct(s) => s.span,
            SpecItem::Enum(e) => e.span,
            SpecItem::Annotation(a) => a.span,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeclSpecs {
    pub items: Vec<SpecItem>,
    pub span: Span,
}

impl DeclSpecs {
    pub fn has_storage(&self, st: Storage) -> bool {
        self.items
            .iter()
            .any(|i| matches!(i, SpecItem::Storage(s, _) if *s == st))
    }

    pub fn is_const(&self) -> bool {
        self.items
            .iter()
            .any(|i| matches!(i, SpecItem::Qualifier(Qualifier::Const, _)))
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.items.iter().filter_map(|i| match i {
            SpecItem::Annotation(a) => Some(a),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructSpec {
    pub name: Option<Ident>,
    pub members: Option<Vec<Declaration>>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Enumerator {
    pub name: Ident,
    pub value: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnumSpec {
    pub name: Option<Ident>,
    pub enumerators: Option<Vec<Enumerator>>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PtrItem {
    Qualifier(Qualifier, Span),
    Annotation(Annotation),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointerLevel {
    pub star: Span,
    pub items: Vec<PtrItem>,
}

impl PointerLevel {
    pub fn is_const(&self) -> bool {
        self.items
            .iter()
            .any(|i| matches!(i, PtrItem::Qualifier(Qualifier::Const, _)))
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.items.iter().filter_map(|i| match i {
            PtrItem::Annotation(a) => Some(a),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DeclSuffix {
    None,
    Array(Option<Box<Expr>>),
    /// Parameter list; `explicit_void` records a written `(void)`.
    Function {
        params: Vec<Param>,
        explicit_void: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Declarator {
    pub pointers: Vec<PointerLevel>,
    pub name: Option<Ident>,
    pub suffix: DeclSuffix,
    pub span: Span,
}

impl Declarator {
    pub fn name(&self) -> &str {
        self.name.as_ref().map(|n| n.name.as_str()).unwrap_or("")
    }

    pub fn params(&self) -> Option<&[Param]> {
        match &self.suffix {
            DeclSuffix::Function { params, .. } => Some(params),
            _ => None,
        }
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.pointers.iter().flat_map(|p| p.annotations())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub specs: DeclSpecs,
    pub declarator: Declarator,
    pub span: Span,
}

impl Param {
    /// Annotations written anywhere in the parameter, in source order.
    pub fn annotations(&self) -> Vec<&Annotation> {
        self.specs.annotations().chain(self.declarator.annotations()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitDeclarator {
    pub declarator: Declarator,
    pub init: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Declaration {
    pub specs: DeclSpecs,
    pub declarators: Vec<InitDeclarator>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDef {
    pub specs: DeclSpecs,
    pub declarator: Declarator,
    pub body: Block,
    pub span: Span,
}

impl FunctionDef {
    pub fn name(&self) -> &str {
        self.declarator.name()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
    /// The closing brace.
    pub close: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Block(Block),
    Decl(Declaration),
    Expr(Expr),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    Return {
        keyword: Span,
        value: Option<Expr>,
    },
    Empty,
    /// `e_checked("K") stmt` / `e_unchecked("K") stmt`
    Annotated {
        annotation: Annotation,
        body: Box<Stmt>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Plus,
    Not,
    BitNot,
    Deref,
    AddrOf,
    PreInc,
    PreDec,
    PostInc,
    PostDec,
}

impl UnaryOp {
    pub fn as_str(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Plus => "+",
            UnaryOp::Not => "!",
            UnaryOp::BitNot => "~",
            UnaryOp::Deref => "*",
            UnaryOp::AddrOf => "&",
            UnaryOp::PreInc | UnaryOp::PostInc => "++",
            UnaryOp::PreDec | UnaryOp::PostDec => "--",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Mul,
    Div,
    Rem,
    Add,
    Sub,
    Shl,
    Shr,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitXor => "^",
            BinaryOp::BitOr => "|",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinaryOp> {
        use BinaryOp::*;
        Some(match s {
            "*" => Mul,
            "/" => Div,
            "%" => Rem,
            "+" => Add,
            "-" => Sub,
            "<<" => Shl,
            ">>" => Shr,
            "<" => Lt,
            ">" => Gt,
            "<=" => Le,
            ">=" => Ge,
            "==" => Eq,
            "!=" => Ne,
            "&" => BitAnd,
            "^" => BitXor,
            "|" => BitOr,
            "&&" => LogAnd,
            "||" => LogOr,
            _ => return None,
        })
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Lt | BinaryOp::Gt | BinaryOp::Le | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::LogAnd | BinaryOp::LogOr)
    }
}

/// A type written in a cast.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeName {
    pub specs: DeclSpecs,
    pub pointers: Vec<PointerLevel>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Ident(String),
    IntLit {
        value: i64,
        text: String,
    },
    FloatLit {
        value: f64,
        text: String,
    },
    CharLit {
        value: i64,
        text: String,
    },
    StrLit(String),
    Paren(Box<Expr>),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Assign {
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        callee: Ident,
        args: Vec<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Member {
        base: Box<Expr>,
        field: Ident,
        arrow: bool,
    },
    Cast {
        ty: TypeName,
        expr: Box<Expr>,
    },
}

impl Expr {
    /// The expression with any enclosing parentheses removed.
    pub fn unparen(&self) -> &Expr {
        match &self.kind {
            ExprKind::Paren(e) => e.unparen(),
            _ => self,
        }
    }
}
