//! Lexing, parsing and include resolution for annotated mini-C sources.

pub mod ast;
pub mod includes;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use ast::TranslationUnit;
pub use includes::{resolve_includes, Library};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_translation_unit;

use crate::diagnostics::Diagnostic;

/// Object-like constants understood without a preprocessor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedConstant {
    Null,
    Int(i64),
}

pub fn named_constant(name: &str) -> Option<NamedConstant> {
    match name {
        "NULL" => Some(NamedConstant::Null),
        "EOF" => Some(NamedConstant::Int(-1)),
        "EBADF" => Some(NamedConstant::Int(9)),
        "O_RDONLY" => Some(NamedConstant::Int(0)),
        _ => None,
    }
}

/// Tokenizes and parses one source buffer.
pub fn parse_source(source: &str) -> (TranslationUnit, Vec<Diagnostic>) {
    let (tokens, mut diags) = tokenize(source);
    let (tu, parse_diags) = parse_translation_unit(&tokens);
    diags.extend(parse_diags);
    (tu, diags)
}
