//! Tokenizer for the supported C subset.

use crate::annotations::registry;
use crate::diagnostics::{Code, Diagnostic};
use crate::span::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Punctuator,
    IntegerLiteral,
    FloatingLiteral,
    StringLiteral,
    CharLiteral,
    AnnotationName,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.is(TokenKind::Punctuator, p)
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.is(TokenKind::Keyword, k)
    }
}

pub const KEYWORDS: &[&str] = &[
    "typedef", "struct", "enum", "union", "void", "_Bool", "bool", "char", "short", "int", "long", "unsigned",
    "signed", "float", "double", "const", "restrict", "volatile", "extern", "static", "inline", "if", "else", "while",
    "return", "for", "do", "switch", "case", "default", "goto", "break", "continue", "sizeof",
];

const PUNCTUATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "(", ")", "{", "}", "[", "]", ";", ",", ".", "+", "-", "*", "/", "%", "<", ">", "=", "!",
    "~", "&", "|", "^", "?", ":", "#",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    fn span_from(&self, (start, line, col): (usize, u32, u32)) -> Span {
        Span::new(start as u32, (self.pos - start) as u32, line, col)
    }
}

/// Splits `source` into tokens. Comments and whitespace are dropped; lexical
/// errors are reported and the offending character is skipped.
pub fn tokenize(source: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor {
        src: source,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    while let Some(c) = cur.peek() {
        let start = cur.mark();
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.rest().starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.rest().starts_with("/*") {
            cur.bump();
            cur.bump();
            let mut closed = false;
            while cur.peek().is_some() {
                if cur.rest().starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    closed = true;
                    break;
                }
                cur.bump();
            }
            if !closed {
                diags.push(Diagnostic::detail(
                    Code::Lex,
                    cur.span_from(start),
                    "unterminated comment",
                ));
            }
            continue;
        }

        let kind = if c.is_ascii_alphabetic() || c == '_' {
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            let word = &source[start.0..cur.pos];
            if KEYWORDS.contains(&word) {
                TokenKind::Keyword
            } else if registry::is_annotation_name(word) {
                TokenKind::AnnotationName
            } else {
                TokenKind::Identifier
            }
        } else if c.is_ascii_digit() || (c == '.' && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit())) {
            lex_number(&mut cur)
        } else if c == '"' || c == '\'' {
            match lex_quoted(&mut cur, c) {
                Ok(kind) => kind,
                Err(msg) => {
                    diags.push(Diagnostic::detail(Code::Lex, cur.span_from(start), msg));
                    continue;
                }
            }
        } else if let Some(p) = PUNCTUATORS.iter().find(|p| cur.rest().starts_with(**p)) {
            for _ in 0..p.len() {
                cur.bump();
            }
            TokenKind::Punctuator
        } else {
            cur.bump();
            diags.push(Diagnostic::detail(
                Code::Lex,
                cur.span_from(start),
                format!("illegal character '{}'", c.escape_default()),
            ));
            continue;
        };

        let span = cur.span_from(start);
        tokens.push(Token {
            kind,
            lexeme: source[start.0..cur.pos].to_string(),
            span,
        });
    }
    (tokens, diags)
}

fn lex_number(cur: &mut Cursor<'_>) -> TokenKind {
    let mut float = false;
    if cur.rest().starts_with("0x") || cur.rest().starts_with("0X") {
        cur.bump();
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_hexdigit()) {
            cur.bump();
        }
    } else {
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
        if cur.peek() == Some('.') {
            float = true;
            cur.bump();
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
        }
        if matches!(cur.peek(), Some('e' | 'E')) {
            let sign = matches!(cur.peek_at(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if matches!(cur.peek_at(digit_at), Some(d) if d.is_ascii_digit()) {
                float = true;
                for _ in 0..digit_at {
                    cur.bump();
                }
                while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                    cur.bump();
                }
            }
        }
    }
    while matches!(cur.peek(), Some('u' | 'U' | 'l' | 'L' | 'f' | 'F')) {
        cur.bump();
    }
    if float {
        TokenKind::FloatingLiteral
    } else {
        TokenKind::IntegerLiteral
    }
}

fn lex_quoted(cur: &mut Cursor<'_>, quote: char) -> Result<TokenKind, &'static str> {
    cur.bump();
    loop {
        match cur.peek() {
            None | Some('\n') => {
                return Err(if quote == '"' {
                    "unterminated string literal"
                } else {
                    "unterminated character literal"
                })
            }
            Some('\\') => {
                cur.bump();
                cur.bump();
            }
            Some(c) if c == quote => {
                cur.bump();
                break;
            }
            Some(_) => {
                cur.bump();
            }
        }
    }
    Ok(if quote == '"' {
        TokenKind::StringLiteral
    } else {
        TokenKind::CharLiteral
    })
}

/// Value of an integer literal lexeme, ignoring suffixes.
pub fn int_literal_value(lexeme: &str) -> Option<i64> {
    let digits = lexeme.trim_end_matches(['u', 'U', 'l', 'L']);
    if let Some(hex) = digits.strip_prefix("0x").or_else(|| digits.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()
    } else if digits.len() > 1 && digits.starts_with('0') {
        i64::from_str_radix(&digits[1..], 8).ok()
    } else {
        digits.parse().ok()
    }
}

pub fn float_literal_value(lexeme: &str) -> Option<f64> {
    lexeme.trim_end_matches(['f', 'F', 'l', 'L']).parse().ok()
}

/// Numeric value of a character literal such as `'a'` or `'\0'`.
pub fn char_literal_value(lexeme: &str) -> Option<i64> {
    let inner = lexeme.strip_prefix('\'')?.strip_suffix('\'')?;
    let mut chars = inner.chars();
    let value = match chars.next()? {
        '\\' => match chars.next()? {
            'n' => 10,
            't' => 9,
            'r' => 13,
            '0' => 0,
            '\\' => 92,
            '\'' => 39,
            '"' => 34,
            'a' => 7,
            'b' => 8,
            'f' => 12,
            'v' => 11,
            _ => return None,
        },
        c => c as i64,
    };
    Some(value)
}
