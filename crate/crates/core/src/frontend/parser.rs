//! Recursive-descent parser with statement-granular error recovery.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{char_literal_value, float_literal_value, int_literal_value, Token, TokenKind};
use super::{named_constant, NamedConstant};
use crate::annotations::registry::{self, Form};
use crate::annotations::{Annotation, AnnotationKind, PropAssign, PropValue, Sentinel, Site, ValuePredicate};
use crate::diagnostics::{Code, Diagnostic};
use crate::libmodels::LIBRARY_TYPE_NAMES;
use crate::span::Span;

type PResult<T> = Result<T, Diagnostic>;

const TYPE_KEYWORDS: &[&str] = &[
    "void", "_Bool", "bool", "char", "short", "int", "long", "unsigned", "signed", "float", "double",
];

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "for", "do", "switch", "case", "default", "goto", "break", "continue", "sizeof", "union",
];

pub(crate) struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    typedefs: HashSet<String>,
    diags: Vec<Diagnostic>,
}

/// Parses a token stream into a translation unit. Errors are collected and
/// parsing resumes at the next `;` or `}`.
pub fn parse_translation_unit(tokens: &[Token]) -> (TranslationUnit, Vec<Diagnostic>) {
    let mut p = Parser::new(tokens);
    let mut items = Vec::new();
    while !p.at_end() {
        let start = p.pos;
        match p.item() {
            Ok(Some(item)) => items.push(item),
            Ok(None) => {}
            Err(d) => {
                p.diags.push(d);
                p.recover_top(start);
            }
        }
    }
    (TranslationUnit { items }, p.diags)
}

fn parse_error(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::detail(Code::Parse, span, msg)
}

fn ann_error(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::detail(Code::AnnArg, span, msg)
}

impl<'t> Parser<'t> {
    pub(crate) fn new(toks: &'t [Token]) -> Self {
        Parser {
            toks,
            pos: 0,
            typedefs: LIBRARY_TYPE_NAMES.iter().map(|s| s.to_string()).collect(),
            diags: Vec::new(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + n)
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn here(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => self
                .toks
                .last()
                .map(|t| Span::new(t.span.end(), 0, t.span.line, t.span.col + t.span.len))
                .unwrap_or_default(),
        }
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos - 1].span
    }

    fn check_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn check_keyword(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.check_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str, context: &str) -> PResult<Span> {
        if self.check_punct(p) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("expected '{p}' {context}")))
        }
    }

    fn unexpected(&self, msg: &str) -> Diagnostic {
        match self.peek() {
            Some(t) => parse_error(t.span, format!("{msg}, found '{}'", t.lexeme)),
            None => parse_error(self.here(), format!("{msg}, found end of file")),
        }
    }

    fn ident(&mut self, context: &str) -> PResult<Ident> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(Ident {
                    name: t.lexeme.clone(),
                    span: t.span,
                })
            }
            _ => Err(self.unexpected(&format!("expected identifier {context}"))),
        }
    }

    /// Skips to just past the next `;` at brace depth zero, or past the `}`
    /// closing a brace opened during the skip.
    fn recover_top(&mut self, start: usize) {
        if self.pos == start && !self.at_end() {
            self.pos += 1;
        }
        let mut depth = 0i32;
        let mut parens = 0i32;
        while let Some(t) = self.peek() {
            if t.is_punct("(") {
                parens += 1;
            } else if t.is_punct(")") {
                parens = (parens - 1).max(0);
            } else if parens > 0 {
                self.pos += 1;
                continue;
            } else if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                depth -= 1;
                if depth <= 0 {
                    self.pos += 1;
                    return;
                }
            } else if t.is_punct(";") && depth == 0 {
                self.pos += 1;
                return;
            }
            self.pos += 1;
        }
    }

    /// Statement-level recovery: stops after `;` or before the `}` that closes
    /// the enclosing block.
    fn recover_stmt(&mut self, start: usize) {
        if self.pos == start && !self.at_end() && !self.check_punct("}") {
            self.pos += 1;
        }
        let mut depth = 0i32;
        let mut parens = 0i32;
        while let Some(t) = self.peek() {
            if t.is_punct("(") {
                parens += 1;
            } else if t.is_punct(")") {
                parens = (parens - 1).max(0);
            } else if parens > 0 {
                self.pos += 1;
                continue;
            } else if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                if depth == 0 {
                    return;
                }
                depth -= 1;
                if depth == 0 {
                    self.pos += 1;
                    return;
                }
            } else if t.is_punct(";") && depth == 0 {
                self.pos += 1;
                return;
            }
            self.pos += 1;
        }
    }

    // ---- items -------------------------------------------------------

    fn item(&mut self) -> PResult<Option<Item>> {
        let t = self.peek().expect("not at end");
        if t.is_punct("#") {
            return self.directive().map(Some);
        }
        if t.kind == TokenKind::AnnotationName && registry::form_of(&t.lexeme) == Some(Form::Global) {
            let ann = self.annotation(Site::Global)?;
            let semi = self.expect_punct(";", "after global annotation")?;
            let span = ann.span.to(semi);
            return Ok(Some(Item {
                kind: ItemKind::GlobalAnnotation(ann),
                span,
            }));
        }
        if t.is_punct(";") {
            self.pos += 1;
            return Ok(None);
        }

        let mut specs = self.specs(Site::Typedef)?;
        if self.check_punct(";") {
            let semi = self.bump().span;
            if specs.has_storage(Storage::Typedef) {
                return Err(parse_error(semi, "typedef declares no name"));
            }
            if !specs
                .items
                .iter()
                .any(|i| matches!(i, SpecItem::Struct(_) | SpecItem::Enum(_)))
            {
                return Err(parse_error(semi, "declaration declares nothing"));
            }
            set_spec_sites(&mut specs, Site::StructType);
            let span = specs.span.to(semi);
            return Ok(Some(Item {
                kind: ItemKind::TagDefinition(specs),
                span,
            }));
        }

        let mut first = self.declarator(false, Site::Typedef)?;
        let is_typedef = specs.has_storage(Storage::Typedef);
        if matches!(first.suffix, DeclSuffix::Function { .. }) && !is_typedef {
            set_spec_sites(&mut specs, Site::ReturnType);
            set_pointer_sites(&mut first, Site::ReturnType);
            if self.check_punct("{") {
                let body = self.block()?;
                let span = specs.span.to(body.span);
                return Ok(Some(Item {
                    kind: ItemKind::FunctionDef(FunctionDef {
                        specs,
                        declarator: first,
                        body,
                        span,
                    }),
                    span,
                }));
            }
            let semi = self.expect_punct(";", "after function declaration")?;
            let span = specs.span.to(semi);
            let decl = Declaration {
                specs,
                declarators: vec![InitDeclarator {
                    declarator: first,
                    init: None,
                }],
                span,
            };
            return Ok(Some(Item {
                kind: ItemKind::FunctionDecl(decl),
                span,
            }));
        }

        let mut declarators = vec![InitDeclarator {
            declarator: first,
            init: None,
        }];
        while self.eat_punct(",") {
            let d = self.declarator(false, Site::Typedef)?;
            declarators.push(InitDeclarator {
                declarator: d,
                init: None,
            });
        }
        if self.check_punct("=") {
            return Err(parse_error(self.here(), "file-scope initializers are not supported"));
        }
        let semi = self.expect_punct(";", "after declaration")?;
        let span = specs.span.to(semi);
        if is_typedef {
            for d in &declarators {
                self.typedefs.insert(d.declarator.name().to_string());
            }
            let decl = Declaration {
                specs,
                declarators,
                span,
            };
            return Ok(Some(Item {
                kind: ItemKind::Typedef(decl),
                span,
            }));
        }
        if !specs.has_storage(Storage::Extern) {
            return Err(parse_error(
                declarators[0].declarator.span,
                "file-scope object definitions are not supported; use 'extern'",
            ));
        }
        set_spec_sites(&mut specs, Site::Local);
        Ok(Some(Item {
            kind: ItemKind::GlobalVar(Declaration {
                specs,
                declarators,
                span,
            }),
            span,
        }))
    }

    fn directive(&mut self) -> PResult<Item> {
        let hash = self.bump().span;
        let line = hash.line;
        let result = (|| {
            let name = self.peek().filter(|t| t.span.line == line);
            match name {
                Some(t) if t.lexeme == "include" => {
                    self.pos += 1;
                }
                Some(t) => {
                    return Err(parse_error(
                        t.span,
                        format!("preprocessor directive '#{}' is not supported", t.lexeme),
                    ))
                }
                None => return Err(parse_error(hash, "empty preprocessor directive")),
            }
            match self.peek() {
                Some(t) if t.kind == TokenKind::StringLiteral && t.span.line == line => {
                    self.pos += 1;
                    let header = t.lexeme.trim_matches('"').to_string();
                    Ok(Item {
                        kind: ItemKind::Include(Include { header, system: false }),
                        span: hash.to(t.span),
                    })
                }
                Some(t) if t.is_punct("<") && t.span.line == line => {
                    self.pos += 1;
                    let mut header = String::new();
                    loop {
                        match self.peek() {
                            Some(t) if t.is_punct(">") && t.span.line == line => {
                                self.pos += 1;
                                break;
                            }
                            Some(t) if t.span.line == line => {
                                header.push_str(&t.lexeme);
                                self.pos += 1;
                            }
                            _ => return Err(parse_error(hash, "unterminated #include <...>")),
                        }
                    }
                    Ok(Item {
                        kind: ItemKind::Include(Include { header, system: true }),
                        span: hash.to(self.prev_span()),
                    })
                }
                _ => Err(parse_error(hash, "expected <header> or \"header\" after #include")),
            }
        })();
        if result.is_err() {
            while self.peek().is_some_and(|t| t.span.line == line) {
                self.pos += 1;
            }
        }
        result
    }

    // ---- declarations ------------------------------------------------

    fn starts_specs(&self) -> bool {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Keyword => {
                matches!(
                    t.lexeme.as_str(),
                    "typedef" | "extern" | "static" | "inline" | "const" | "restrict" | "volatile" | "struct" | "enum"
                ) || TYPE_KEYWORDS.contains(&t.lexeme.as_str())
            }
            Some(t) if t.kind == TokenKind::Identifier => {
                self.typedefs.contains(&t.lexeme)
                    && !self
                        .peek_at(1)
                        .is_some_and(|n| n.is_punct("=") || n.is_punct("(") || n.is_punct("->") || n.is_punct("."))
            }
            _ => false,
        }
    }

    fn specs(&mut self, site: Site) -> PResult<DeclSpecs> {
        let start = self.here();
        let mut items = Vec::new();
        let mut seen_type = false;
        while let Some(t) = self.peek() {
            match t.kind {
                TokenKind::Keyword => {
                    let kw = t.lexeme.as_str();
                    let item = match kw {
                        "typedef" => SpecItem::Storage(Storage::Typedef, t.span),
                        "extern" => SpecItem::Storage(Storage::Extern, t.span),
                        "static" => SpecItem::Storage(Storage::Static, t.span),
                        "inline" => SpecItem::Storage(Storage::Inline, t.span),
                        "const" => SpecItem::Qualifier(Qualifier::Const, t.span),
                        "restrict" => SpecItem::Qualifier(Qualifier::Restrict, t.span),
                        "volatile" => SpecItem::Qualifier(Qualifier::Volatile, t.span),
                        "struct" => {
                            seen_type = true;
                            items.push(SpecItem::Struct(self.struct_spec()?));
                            continue;
                        }
                        "enum" => {
                            seen_type = true;
                            items.push(SpecItem::Enum(self.enum_spec()?));
                            continue;
                        }
                        "union" => {
                            return Err(parse_error(t.span, "unions are not supported"));
                        }
                        k if TYPE_KEYWORDS.contains(&k) => {
                            seen_type = true;
                            SpecItem::TypeKeyword(k.to_string(), t.span)
                        }
                        _ => break,
                    };
                    self.pos += 1;
                    items.push(item);
                }
                TokenKind::Identifier if !seen_type && self.typedefs.contains(&t.lexeme) => {
                    self.pos += 1;
                    seen_type = true;
                    items.push(SpecItem::TypedefName(Ident {
                        name: t.lexeme.clone(),
                        span: t.span,
                    }));
                }
                TokenKind::AnnotationName => {
                    match registry::form_of(&t.lexeme) {
                        Some(Form::Flag) | Some(Form::Call) => {}
                        _ => break,
                    }
                    if matches!(t.lexeme.as_str(), "e_checked" | "e_unchecked") {
                        return Err(parse_error(
                            t.span,
                            format!("'{}' annotates statements, not declarations", t.lexeme),
                        ));
                    }
                    let a = self.annotation(site)?;
                    items.push(SpecItem::Annotation(a));
                }
                _ => break,
            }
        }
        if !seen_type {
            return Err(self.unexpected("expected type specifier"));
        }
        let span = items.iter().map(SpecItem::span).fold(start, |acc, s| acc.to(s));
        Ok(DeclSpecs { items, span })
    }

    fn struct_spec(&mut self) -> PResult<StructSpec> {
        let kw = self.bump().span;
        let name = match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Some(self.ident("")?),
            _ => None,
        };
        let mut end = name.as_ref().map(|n| n.span).unwrap_or(kw);
        let members = if self.eat_punct("{") {
            let mut members = Vec::new();
            while !self.check_punct("}") {
                if self.at_end() {
                    return Err(self.unexpected("expected '}' closing struct"));
                }
                let specs = self.specs(Site::StructMember)?;
                let mut declarators = Vec::new();
                loop {
                    let d = self.declarator(false, Site::StructMember)?;
                    declarators.push(InitDeclarator {
                        declarator: d,
                        init: None,
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                let semi = self.expect_punct(";", "after struct member")?;
                members.push(Declaration {
                    span: specs.span.to(semi),
                    specs,
                    declarators,
                });
            }
            end = self.bump().span;
            Some(members)
        } else {
            None
        };
        if name.is_none() && members.is_none() {
            return Err(self.unexpected("expected struct name or body"));
        }
        Ok(StructSpec {
            name,
            members,
            span: kw.to(end),
        })
    }

    fn enum_spec(&mut self) -> PResult<EnumSpec> {
        let kw = self.bump().span;
        let name = match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Some(self.ident("")?),
            _ => None,
        };
        let mut end = name.as_ref().map(|n| n.span).unwrap_or(kw);
        let enumerators = if self.eat_punct("{") {
            let mut list = Vec::new();
            while !self.check_punct("}") {
                let name = self.ident("in enumerator list")?;
                let value = if self.eat_punct("=") {
                    Some(self.binary(1)?)
                } else {
                    None
                };
                list.push(Enumerator { name, value });
                if !self.eat_punct(",") {
                    break;
                }
            }
            end = self.expect_punct("}", "closing enum")?;
            Some(list)
        } else {
            None
        };
        Ok(EnumSpec {
            name,
            enumerators,
            span: kw.to(end),
        })
    }

    fn pointer_levels(&mut self, site: Site) -> PResult<Vec<PointerLevel>> {
        let mut pointers = Vec::new();
        while self.check_punct("*") {
            let star = self.bump().span;
            let mut items = Vec::new();
            while let Some(t) = self.peek() {
                match (t.kind, t.lexeme.as_str()) {
                    (TokenKind::Keyword, "const") => {
                        items.push(PtrItem::Qualifier(Qualifier::Const, t.span));
                        self.pos += 1;
                    }
                    (TokenKind::Keyword, "restrict") => {
                        items.push(PtrItem::Qualifier(Qualifier::Restrict, t.span));
                        self.pos += 1;
                    }
                    (TokenKind::Keyword, "volatile") => {
                        items.push(PtrItem::Qualifier(Qualifier::Volatile, t.span));
                        self.pos += 1;
                    }
                    (TokenKind::AnnotationName, name)
                        if matches!(registry::form_of(name), Some(Form::Flag | Form::Call))
                            && !matches!(name, "e_checked" | "e_unchecked") =>
                    {
                        items.push(PtrItem::Annotation(self.annotation(site)?));
                    }
                    _ => break,
                }
            }
            pointers.push(PointerLevel { star, items });
        }
        Ok(pointers)
    }

    fn declarator(&mut self, abstract_ok: bool, site: Site) -> PResult<Declarator> {
        let start = self.here();
        let pointers = self.pointer_levels(site)?;
        let name = match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Some(self.ident("")?),
            Some(t) if t.kind == TokenKind::AnnotationName => {
                return Err(parse_error(
                    t.span,
                    format!(
                        "annotation '{}' is not allowed after the declared name's position",
                        t.lexeme
                    ),
                ))
            }
            _ if abstract_ok => None,
            _ => return Err(self.unexpected("expected identifier in declarator")),
        };
        let suffix = if self.check_punct("(") {
            self.pos += 1;
            self.param_list()?
        } else if self.eat_punct("[") {
            let size = if self.check_punct("]") {
                None
            } else {
                Some(Box::new(self.expr()?))
            };
            self.expect_punct("]", "closing array declarator")?;
            DeclSuffix::Array(size)
        } else {
            DeclSuffix::None
        };
        let end = if self.pos > 0 { self.prev_span() } else { start };
        let span = if self.pos > 0 && end.offset >= start.offset {
            start.to(end)
        } else {
            Span::new(start.offset, 0, start.line, start.col)
        };
        Ok(Declarator {
            pointers,
            name,
            suffix,
            span,
        })
    }

    fn param_list(&mut self) -> PResult<DeclSuffix> {
        if self.check_keyword("void") && self.peek_at(1).is_some_and(|t| t.is_punct(")")) {
            self.pos += 2;
            return Ok(DeclSuffix::Function {
                params: Vec::new(),
                explicit_void: true,
            });
        }
        let mut params = Vec::new();
        if self.eat_punct(")") {
            return Ok(DeclSuffix::Function {
                params,
                explicit_void: false,
            });
        }
        loop {
            if self.check_punct("...") {
                return Err(parse_error(self.here(), "variadic functions are not supported"));
            }
            let specs = self.specs(Site::Parameter)?;
            let declarator = self.declarator(true, Site::Parameter)?;
            let span = if declarator.span.len > 0 {
                specs.span.to(declarator.span)
            } else {
                specs.span
            };
            params.push(Param {
                specs,
                declarator,
                span,
            });
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct(")", "closing parameter list")?;
            break;
        }
        Ok(DeclSuffix::Function {
            params,
            explicit_void: false,
        })
    }

    // ---- annotations -------------------------------------------------

    /// Collects the tokens between a `(` at the cursor and its matching `)`.
    fn paren_group(&mut self) -> PResult<(&'t [Token], Span)> {
        let open = self.expect_punct("(", "after annotation name")?;
        let start = self.pos;
        let mut depth = 0;
        while let Some(t) = self.peek() {
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                if depth == 0 {
                    let inner = &self.toks[start..self.pos];
                    let close = self.bump().span;
                    return Ok((inner, open.to(close)));
                }
                depth -= 1;
            }
            self.pos += 1;
        }
        Err(parse_error(open, "unbalanced parentheses in annotation"))
    }

    pub(crate) fn annotation(&mut self, site: Site) -> PResult<Annotation> {
        let start_pos = self.pos;
        let name_tok = self.bump();
        let name = name_tok.lexeme.as_str();
        let form = registry::form_of(name).expect("annotation token");
        let kind = match form {
            Form::Flag => {
                if self.check_punct("(") {
                    let (_, group) = self.paren_group()?;
                    return Err(ann_error(
                        name_tok.span.to(group),
                        format!("'{name}' takes no arguments"),
                    ));
                }
                match name {
                    "e_hown" => AnnotationKind::Hown,
                    "e_own" => AnnotationKind::Own,
                    "e_opt_hown" => AnnotationKind::OptHown,
                    "e_excl" => AnnotationKind::Excl,
                    "e_shar" => AnnotationKind::Shar,
                    "e_type" => AnnotationKind::Type,
                    "e_init" => AnnotationKind::Init,
                    "e_uninit" => AnnotationKind::Uninit,
                    "e_fini" => AnnotationKind::Fini,
                    "e_release" => AnnotationKind::Release,
                    _ => unreachable!("flag registry"),
                }
            }
            Form::Predicate => {
                return Err(ann_error(
                    name_tok.span,
                    format!("'{name}' is only valid inside e_val(...)"),
                ))
            }
            Form::Call | Form::Global => {
                let (args, group) = self.paren_group()?;
                let span = name_tok.span.to(group);
                annotation_args(name, args, span)?
            }
        };
        let span = name_tok.span.to(self.prev_span());
        let raw = self.toks[start_pos..self.pos]
            .iter()
            .map(|t| (t.kind, t.lexeme.clone()))
            .collect();
        Ok(Annotation { kind, span, site, raw })
    }

    // ---- statements --------------------------------------------------

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect_punct("{", "opening block")?;
        let mut stmts = Vec::new();
        loop {
            if self.check_punct("}") {
                break;
            }
            if self.at_end() {
                return Err(parse_error(open, "unterminated block"));
            }
            let start = self.pos;
            match self.stmt() {
                Ok(s) => stmts.push(s),
                Err(d) => {
                    self.diags.push(d);
                    self.recover_stmt(start);
                }
            }
        }
        let close = self.bump().span;
        Ok(Block {
            stmts,
            span: open.to(close),
            close,
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let t = match self.peek() {
            Some(t) => t,
            None => return Err(self.unexpected("expected statement")),
        };
        if t.is_punct("{") {
            let b = self.block()?;
            let span = b.span;
            return Ok(Stmt {
                kind: StmtKind::Block(b),
                span,
            });
        }
        if t.is_punct(";") {
            self.pos += 1;
            return Ok(Stmt {
                kind: StmtKind::Empty,
                span: t.span,
            });
        }
        if t.kind == TokenKind::Keyword {
            match t.lexeme.as_str() {
                "if" => {
                    self.pos += 1;
                    self.expect_punct("(", "after 'if'")?;
                    let cond = self.expr()?;
                    self.expect_punct(")", "closing 'if' condition")?;
                    let then = Box::new(self.stmt()?);
                    let els = if self.check_keyword("else") {
                        self.pos += 1;
                        Some(Box::new(self.stmt()?))
                    } else {
                        None
                    };
                    let end = els.as_ref().map(|e| e.span).unwrap_or(then.span);
                    return Ok(Stmt {
                        kind: StmtKind::If { cond, then, els },
                        span: t.span.to(end),
                    });
                }
                "while" => {
                    self.pos += 1;
                    self.expect_punct("(", "after 'while'")?;
                    let cond = self.expr()?;
                    self.expect_punct(")", "closing 'while' condition")?;
                    let body = Box::new(self.stmt()?);
                    let span = t.span.to(body.span);
                    return Ok(Stmt {
                        kind: StmtKind::While { cond, body },
                        span,
                    });
                }
                "return" => {
                    self.pos += 1;
                    let value = if self.check_punct(";") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    let semi = self.expect_punct(";", "after return statement")?;
                    return Ok(Stmt {
                        kind: StmtKind::Return { keyword: t.span, value },
                        span: t.span.to(semi),
                    });
                }
                "else" => return Err(parse_error(t.span, "'else' without 'if'")),
                k if UNSUPPORTED_KEYWORDS.contains(&k) => {
                    return Err(parse_error(t.span, format!("'{k}' is outside the supported C subset")))
                }
                _ => {}
            }
        }
        if t.kind == TokenKind::AnnotationName {
            if matches!(t.lexeme.as_str(), "e_checked" | "e_unchecked") {
                let annotation = self.annotation(Site::Statement)?;
                let body = Box::new(self.stmt()?);
                let span = annotation.span.to(body.span);
                return Ok(Stmt {
                    kind: StmtKind::Annotated { annotation, body },
                    span,
                });
            }
            return Err(parse_error(
                t.span,
                format!("annotation '{}' is not allowed at statement level", t.lexeme),
            ));
        }
        if self.starts_specs() {
            let d = self.local_declaration()?;
            let span = d.span;
            return Ok(Stmt {
                kind: StmtKind::Decl(d),
                span,
            });
        }
        let e = self.expr()?;
        let semi = self.expect_punct(";", "after expression")?;
        let span = e.span.to(semi);
        Ok(Stmt {
            kind: StmtKind::Expr(e),
            span,
        })
    }

    fn local_declaration(&mut self) -> PResult<Declaration> {
        let mut specs = self.specs(Site::Local)?;
        if specs.has_storage(Storage::Typedef) {
            return Err(parse_error(specs.span, "block-scope typedefs are not supported"));
        }
        set_spec_sites(&mut specs, Site::Local);
        let mut declarators = Vec::new();
        loop {
            let declarator = self.declarator(false, Site::Local)?;
            if matches!(declarator.suffix, DeclSuffix::Function { .. }) {
                return Err(parse_error(
                    declarator.span,
                    "block-scope function declarations are not supported",
                ));
            }
            let init = if self.eat_punct("=") {
                Some(self.assignment()?)
            } else {
                None
            };
            declarators.push(InitDeclarator { declarator, init });
            if !self.eat_punct(",") {
                break;
            }
        }
        let semi = self.expect_punct(";", "after declaration")?;
        Ok(Declaration {
            span: specs.span.to(semi),
            specs,
            declarators,
        })
    }

    // ---- expressions -------------------------------------------------

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.assignment()
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let lhs = self.binary(1)?;
        if let Some(t) = self.peek() {
            if t.is_punct("=") {
                self.pos += 1;
                let rhs = self.assignment()?;
                let span = lhs.span.to(rhs.span);
                return Ok(Expr {
                    kind: ExprKind::Assign {
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    },
                    span,
                });
            }
            if t.kind == TokenKind::Punctuator
                && matches!(
                    t.lexeme.as_str(),
                    "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>="
                )
            {
                return Err(parse_error(
                    t.span,
                    format!("compound assignment '{}' is outside the supported C subset", t.lexeme),
                ));
            }
            if t.is_punct("?") {
                return Err(parse_error(
                    t.span,
                    "the conditional operator is outside the supported C subset",
                ));
            }
        }
        Ok(lhs)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(t) if t.kind == TokenKind::Punctuator => match BinaryOp::from_symbol(&t.lexeme) {
                    Some(op) => op,
                    None => break,
                },
                _ => break,
            };
            let prec = precedence(op);
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            };
        }
        Ok(lhs)
    }

    fn starts_type_name(&self, n: usize) -> bool {
        match self.peek_at(n) {
            Some(t) if t.kind == TokenKind::Keyword => {
                TYPE_KEYWORDS.contains(&t.lexeme.as_str())
                    || matches!(t.lexeme.as_str(), "const" | "volatile" | "struct" | "enum")
            }
            Some(t) if t.kind == TokenKind::Identifier => self.typedefs.contains(&t.lexeme),
            _ => false,
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let t = match self.peek() {
            Some(t) => t,
            None => return Err(self.unexpected("expected expression")),
        };
        if t.kind == TokenKind::Punctuator {
            let op = match t.lexeme.as_str() {
                "-" => Some(UnaryOp::Neg),
                "+" => Some(UnaryOp::Plus),
                "!" => Some(UnaryOp::Not),
                "~" => Some(UnaryOp::BitNot),
                "*" => Some(UnaryOp::Deref),
                "&" => Some(UnaryOp::AddrOf),
                "++" => Some(UnaryOp::PreInc),
                "--" => Some(UnaryOp::PreDec),
                _ => None,
            };
            if let Some(op) = op {
                self.pos += 1;
                let operand = self.unary()?;
                let span = t.span.to(operand.span);
                return Ok(Expr {
                    kind: ExprKind::Unary {
                        op,
                        operand: Box::new(operand),
                    },
                    span,
                });
            }
            if t.is_punct("(") && self.starts_type_name(1) {
                self.pos += 1;
                let specs = self.specs(Site::Local)?;
                let pointers = self.pointer_levels(Site::Local)?;
                if let Some(a) = specs
                    .annotations()
                    .chain(pointers.iter().flat_map(|p| p.annotations()))
                    .next()
                {
                    return Err(parse_error(a.span, "annotations are not permitted in cast type names"));
                }
                if specs.has_storage(Storage::Typedef) || specs.has_storage(Storage::Extern) {
                    return Err(parse_error(specs.span, "storage class in cast type name"));
                }
                let close = self.expect_punct(")", "closing cast")?;
                let ty = TypeName {
                    span: specs.span.to(close),
                    specs,
                    pointers,
                };
                let expr = self.unary()?;
                let span = t.span.to(expr.span);
                return Ok(Expr {
                    kind: ExprKind::Cast {
                        ty,
                        expr: Box::new(expr),
                    },
                    span,
                });
            }
        }
        if t.is_keyword("sizeof") {
            return Err(parse_error(t.span, "'sizeof' is outside the supported C subset"));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.check_punct("(") {
                let open = self.bump().span;
                let callee = match &e.kind {
                    ExprKind::Ident(name) => Ident {
                        name: name.clone(),
                        span: e.span,
                    },
                    _ => return Err(parse_error(open, "only direct calls of named functions are supported")),
                };
                let mut args = Vec::new();
                if !self.check_punct(")") {
                    loop {
                        args.push(self.assignment()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                let close = self.expect_punct(")", "closing argument list")?;
                e = Expr {
                    span: e.span.to(close),
                    kind: ExprKind::Call { callee, args },
                };
            } else if self.eat_punct("[") {
                let index = self.expr()?;
                let close = self.expect_punct("]", "closing subscript")?;
                e = Expr {
                    span: e.span.to(close),
                    kind: ExprKind::Index {
                        base: Box::new(e),
                        index: Box::new(index),
                    },
                };
            } else if self.check_punct(".") || self.check_punct("->") {
                let arrow = self.bump().lexeme == "->";
                let field = self.ident("after member access")?;
                e = Expr {
                    span: e.span.to(field.span),
                    kind: ExprKind::Member {
                        base: Box::new(e),
                        field,
                        arrow,
                    },
                };
            } else if self.check_punct("++") || self.check_punct("--") {
                let t = self.bump();
                let op = if t.lexeme == "++" {
                    UnaryOp::PostInc
                } else {
                    UnaryOp::PostDec
                };
                e = Expr {
                    span: e.span.to(t.span),
                    kind: ExprKind::Unary {
                        op,
                        operand: Box::new(e),
                    },
                };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = match self.peek() {
            Some(t) => t,
            None => return Err(self.unexpected("expected expression")),
        };
        let kind = match t.kind {
            TokenKind::Identifier => ExprKind::Ident(t.lexeme.clone()),
            TokenKind::IntegerLiteral => match int_literal_value(&t.lexeme) {
                Some(value) => ExprKind::IntLit {
                    value,
                    text: t.lexeme.clone(),
                },
                None => return Err(parse_error(t.span, "integer literal out of range")),
            },
            TokenKind::FloatingLiteral => ExprKind::FloatLit {
                value: float_literal_value(&t.lexeme).unwrap_or(0.0),
                text: t.lexeme.clone(),
            },
            TokenKind::CharLiteral => match char_literal_value(&t.lexeme) {
                Some(value) => ExprKind::CharLit {
                    value,
                    text: t.lexeme.clone(),
                },
                None => return Err(parse_error(t.span, "unsupported character literal")),
            },
            TokenKind::StringLiteral => ExprKind::StrLit(t.lexeme.clone()),
            TokenKind::Punctuator if t.lexeme == "(" => {
                self.pos += 1;
                let inner = self.expr()?;
                let close = self.expect_punct(")", "closing parenthesis")?;
                return Ok(Expr {
                    kind: ExprKind::Paren(Box::new(inner)),
                    span: t.span.to(close),
                });
            }
            TokenKind::AnnotationName => {
                return Err(parse_error(
                    t.span,
                    format!("annotation '{}' is not permitted inside expressions", t.lexeme),
                ))
            }
            _ => return Err(self.unexpected("expected expression")),
        };
        self.pos += 1;
        Ok(Expr { kind, span: t.span })
    }
}

fn precedence(op: BinaryOp) -> u8 {
    use BinaryOp::*;
    match op {
        LogOr => 1,
        LogAnd => 2,
        BitOr => 3,
        BitXor => 4,
        BitAnd => 5,
        Eq | Ne => 6,
        Lt | Gt | Le | Ge => 7,
        Shl | Shr => 8,
        Add | Sub => 9,
        Mul | Div | Rem => 10,
    }
}

fn set_spec_sites(specs: &mut DeclSpecs, site: Site) {
    for item in &mut specs.items {
        if let SpecItem::Annotation(a) = item {
            a.site = site;
        }
    }
}

fn set_pointer_sites(decl: &mut Declarator, site: Site) {
    for level in &mut decl.pointers {
        for item in &mut level.items {
            if let PtrItem::Annotation(a) = item {
                a.site = site;
            }
        }
    }
}

// ---- annotation arguments ---------------------------------------------

fn split_commas(tokens: &[Token]) -> Vec<&[Token]> {
    let mut parts = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            depth -= 1;
        } else if t.is_punct(",") && depth == 0 {
            parts.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    if !tokens.is_empty() {
        parts.push(&tokens[start..]);
    }
    parts
}

enum Number {
    Int(i64),
    Float(f64),
    Null,
}

fn number(tokens: &[Token], span: Span) -> PResult<Number> {
    let (neg, rest) = match tokens.first() {
        Some(t) if t.is_punct("-") => (true, &tokens[1..]),
        _ => (false, tokens),
    };
    let [t] = rest else {
        return Err(ann_error(span, "expected a constant"));
    };
    let n = match t.kind {
        TokenKind::IntegerLiteral => {
            Number::Int(int_literal_value(&t.lexeme).ok_or_else(|| ann_error(t.span, "bad integer"))?)
        }
        TokenKind::FloatingLiteral => Number::Float(float_literal_value(&t.lexeme).unwrap_or(0.0)),
        TokenKind::Identifier => match named_constant(&t.lexeme) {
            Some(NamedConstant::Int(v)) => Number::Int(v),
            Some(NamedConstant::Null) if !neg => Number::Null,
            _ => return Err(ann_error(t.span, format!("'{}' is not a known constant", t.lexeme))),
        },
        _ => return Err(ann_error(t.span, "expected a constant")),
    };
    Ok(match (neg, n) {
        (true, Number::Int(v)) => Number::Int(-v),
        (true, Number::Float(v)) => Number::Float(-v),
        (_, n) => n,
    })
}

fn floor_bound(tokens: &[Token], span: Span) -> PResult<i64> {
    match number(tokens, span)? {
        Number::Int(v) => Ok(v),
        Number::Float(f) => Ok(f.floor() as i64),
        Number::Null => Err(ann_error(span, "NULL is not a numeric bound")),
    }
}

fn ceil_bound(tokens: &[Token], span: Span) -> PResult<i64> {
    match number(tokens, span)? {
        Number::Int(v) => Ok(v),
        Number::Float(f) => Ok(f.ceil() as i64),
        Number::Null => Err(ann_error(span, "NULL is not a numeric bound")),
    }
}

fn predicate_term(tokens: &[Token], span: Span) -> PResult<ValuePredicate> {
    let Some(head) = tokens.first() else {
        return Err(ann_error(span, "empty value predicate"));
    };
    let body = tokens
        .get(1..)
        .filter(|r| r.first().is_some_and(|t| t.is_punct("(")) && r.last().is_some_and(|t| t.is_punct(")")))
        .map(|r| &r[1..r.len() - 1])
        .ok_or_else(|| ann_error(head.span, "expected e_geq(...), e_range(...) or e_eq(...)"))?;
    let args = split_commas(body);
    match (head.lexeme.as_str(), args.as_slice()) {
        ("e_geq", [c]) => Ok(ValuePredicate::Geq(floor_bound(c, span)?)),
        ("e_eq", [c]) => match number(c, span)? {
            Number::Int(v) => Ok(ValuePredicate::Eq(v)),
            Number::Float(f) if f.fract() == 0.0 => Ok(ValuePredicate::Eq(f as i64)),
            Number::Float(f) => Ok(ValuePredicate::Range(f.floor() as i64, f.ceil() as i64)),
            Number::Null => Err(ann_error(span, "NULL is not a numeric value")),
        },
        ("e_range", [lo, hi]) => {
            let (lo, hi) = (floor_bound(lo, span)?, ceil_bound(hi, span)?);
            if lo > hi {
                return Err(ann_error(span, format!("empty range [{lo}, {hi}]")));
            }
            Ok(ValuePredicate::Range(lo, hi))
        }
        ("e_geq" | "e_eq" | "e_range", _) => Err(ann_error(
            head.span,
            format!("wrong number of arguments to '{}'", head.lexeme),
        )),
        _ => Err(ann_error(head.span, "expected e_geq(...), e_range(...) or e_eq(...)")),
    }
}

fn predicate(tokens: &[Token], span: Span) -> PResult<ValuePredicate> {
    let mut terms = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            depth -= 1;
        } else if t.is_punct("||") && depth == 0 {
            terms.push(predicate_term(&tokens[start..i], span)?);
            start = i + 1;
        }
    }
    terms.push(predicate_term(&tokens[start..], span)?);
    Ok(if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        ValuePredicate::Or(terms)
    })
}

fn string_arg(args: &[&[Token]], name: &str, span: Span) -> PResult<String> {
    match args {
        [[t]] if t.kind == TokenKind::StringLiteral => Ok(t.lexeme[1..t.lexeme.len() - 1].to_string()),
        _ => Err(ann_error(span, format!("'{name}' expects one string literal argument"))),
    }
}

fn type_arg(tokens: &[Token], span: Span) -> PResult<String> {
    match tokens {
        [t] if t.kind == TokenKind::Identifier
            || (t.kind == TokenKind::Keyword && TYPE_KEYWORDS.contains(&t.lexeme.as_str())) =>
        {
            Ok(t.lexeme.clone())
        }
        _ => Err(ann_error(span, "expected a type name")),
    }
}

fn op_arg(tokens: &[Token], span: Span) -> PResult<String> {
    match tokens {
        [t] if t.kind == TokenKind::Punctuator => Ok(t.lexeme.clone()),
        _ => Err(ann_error(span, "expected an operator")),
    }
}

fn prop_assigns(args: &[&[Token]], allow_any: bool, span: Span) -> PResult<Vec<PropAssign>> {
    if args.is_empty() {
        return Err(ann_error(span, "expected at least one key=value pair"));
    }
    args.iter()
        .map(|arg| match arg {
            [k, eq, v] if k.kind == TokenKind::Identifier && eq.is_punct("=") => {
                let value = if v.is_punct("?") {
                    if !allow_any {
                        return Err(ann_error(v.span, "'?' is only meaningful in e_out"));
                    }
                    PropValue::Any
                } else if v.kind == TokenKind::Identifier {
                    PropValue::Atom(v.lexeme.clone())
                } else {
                    return Err(ann_error(v.span, "property value must be an identifier or '?'"));
                };
                Ok(PropAssign {
                    key: k.lexeme.clone(),
                    value,
                })
            }
            _ => Err(ann_error(span, "expected key=value")),
        })
        .collect()
}

fn annotation_args(name: &str, tokens: &[Token], span: Span) -> PResult<AnnotationKind> {
    let args = split_commas(tokens);
    Ok(match name {
        "e_opt" => match args.as_slice() {
            [arg] => match number(arg, span)? {
                Number::Null => AnnotationKind::Opt(Sentinel::Null),
                Number::Int(v) => AnnotationKind::Opt(Sentinel::Int(v)),
                Number::Float(_) => return Err(ann_error(span, "optional sentinel must be an integer or NULL")),
            },
            _ => return Err(ann_error(span, "'e_opt' expects exactly one sentinel")),
        },
        "e_val" => {
            if tokens.is_empty() {
                return Err(ann_error(span, "'e_val' expects a value predicate"));
            }
            AnnotationKind::Val(predicate(tokens, span)?)
        }
        "e_in" => AnnotationKind::In(prop_assigns(&args, false, span)?),
        "e_out" => AnnotationKind::Out(prop_assigns(&args, true, span)?),
        "e_unsafe" => AnnotationKind::Unsafe(string_arg(&args, name, span)?),
        "e_checked" => AnnotationKind::Checked(string_arg(&args, name, span)?),
        "e_unchecked" => AnnotationKind::Unchecked(string_arg(&args, name, span)?),
        "e_bop" => match args.as_slice() {
            [r, l, op, rhs] => AnnotationKind::Bop {
                result: type_arg(r, span)?,
                lhs: type_arg(l, span)?,
                op: op_arg(op, span)?,
                rhs: type_arg(rhs, span)?,
            },
            _ => return Err(ann_error(span, "'e_bop' expects (result, lhs, operator, rhs)")),
        },
        "e_uop" => match args.as_slice() {
            [r, op, operand] => AnnotationKind::Uop {
                result: type_arg(r, span)?,
                op: op_arg(op, span)?,
                operand: type_arg(operand, span)?,
            },
            _ => return Err(ann_error(span, "'e_uop' expects (result, operator, operand)")),
        },
        "e_declprops" => match args.as_slice() {
            [ty, rest @ ..] if !rest.is_empty() => {
                let type_name = type_arg(ty, span)?;
                let mut annotations = Vec::new();
                for part in rest {
                    let mut sub = Parser::new(part);
                    while let Some(t) = sub.peek() {
                        if t.kind != TokenKind::AnnotationName {
                            return Err(ann_error(t.span, "expected an annotation"));
                        }
                        annotations.push(sub.annotation(Site::Global)?);
                    }
                }
                AnnotationKind::DeclProps { type_name, annotations }
            }
            _ => return Err(ann_error(span, "'e_declprops' expects a type name and annotations")),
        },
        _ => unreachable!("call-form registry"),
    })
}
