//! Warning catalog, message templates and text/JSON rendering.
//!
//! Messages are a pure function of a diagnostic's code and payload, so two
//! diagnostics with equal payloads always render to the same bytes.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::span::Span;

macro_rules! catalog {
    ($($variant:ident => $name:literal, $sev:ident;)*) => {
        /// Stable diagnostic identifiers. Codes are never renumbered.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Code {
            $($variant,)*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[$(Code::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Code::$variant => $name,)*
                }
            }

            pub fn default_severity(self) -> Severity {
                match self {
                    $(Code::$variant => Severity::$sev,)*
                }
            }

            pub fn from_name(name: &str) -> Option<Code> {
                match name {
                    $($name => Some(Code::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

catalog! {
    Parse => "CR-PARSE", Error;
    Lex => "CR-LEX", Error;
    Lower => "CR-LOWER", Error;
    IncludeUnknown => "CR-INCLUDE-UNKNOWN", Warning;
    AnnConflict => "CR-ANN-CONFLICT", Error;
    AnnArg => "CR-ANN-ARG", Error;
    AnnUnknownType => "CR-ANN-UNKNOWN-TYPE", Error;
    AnnRedundant => "CR-ANN-REDUNDANT", Note;
    ModelConflict => "CR-MODEL-CONFLICT", Warning;
    OptDeref => "CR-OPT-DEREF", Warning;
    OptArg => "CR-OPT-ARG", Warning;
    OptRet => "CR-OPT-RET", Warning;
    UninitUse => "CR-UNINIT-USE", Warning;
    UseAfterMove => "CR-USE-AFTER-MOVE", Warning;
    UseAfterRelease => "CR-USE-AFTER-RELEASE", Warning;
    OwnLeak => "CR-OWN-LEAK", Warning;
    OwnUnclear => "CR-OWN-UNCLEAR", Warning;
    ReleaseInvalid => "CR-RELEASE-INVALID", Warning;
    FiniMissing => "CR-FINI-MISSING", Warning;
    NominalOp => "CR-NOMINAL-OP", Warning;
    NominalMix => "CR-NOMINAL-MIX", Warning;
    ValRange => "CR-VAL-RANGE", Warning;
    PreViolation => "CR-PRE-VIOLATION", Warning;
    PostViolation => "CR-POST-VIOLATION", Warning;
    UnsafeAccess => "CR-UNSAFE-ACCESS", Warning;
    UnsafePropagate => "CR-UNSAFE-PROPAGATE", Warning;
    ExclViolation => "CR-EXCL-VIOLATION", Warning;
    ConstCast => "CR-CONST-CAST", Warning;
    Unreachable => "CR-UNREACHABLE", Note;
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
    Note,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Payload = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Diagnostic {
    pub file: String,
    pub span: Span,
    pub code: Code,
    pub severity: Severity,
    pub message: String,
    pub payload: Payload,
}

impl Diagnostic {
    pub fn new<K, V>(code: Code, span: Span, fields: impl IntoIterator<Item = (K, V)>) -> Self
    where
        K: Into<String>,
        V: Into<String>,
    {
        let payload: Payload = fields.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        let message = message_for(code, &payload);
        Diagnostic {
            file: String::new(),
            span,
            code,
            severity: code.default_severity(),
            message,
            payload,
        }
    }

    /// Shorthand for diagnostics whose only payload is a free-form detail.
    pub fn detail(code: Code, span: Span, detail: impl Into<String>) -> Self {
        Diagnostic::new(code, span, [("detail", detail.into())])
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = file.into();
        self
    }

    pub fn place(&self) -> Option<&str> {
        self.payload.get("place").map(String::as_str)
    }

    fn sort_key(&self) -> (&str, u32, u32, &'static str, &str, u32) {
        (
            &self.file,
            self.span.line,
            self.span.col,
            self.code.as_str(),
            &self.message,
            self.span.len,
        )
    }
}

/// Sorts by (file, line, column, code) and drops exact duplicates.
pub fn sort_diagnostics(diags: &mut Vec<Diagnostic>) {
    diags.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    diags.dedup();
}

/// Promotes every warning to an error.
pub fn promote_warnings(diags: &mut [Diagnostic]) {
    for d in diags {
        if d.severity == Severity::Warning {
            d.severity = Severity::Error;
        }
    }
}

fn field<'a>(payload: &'a Payload, key: &str) -> &'a str {
    payload.get(key).map(String::as_str).unwrap_or("?")
}

fn message_for(code: Code, p: &Payload) -> String {
    let f = |k: &str| field(p, k);
    match code {
        Code::Parse | Code::Lex | Code::Lower | Code::ExclViolation => f("detail").to_string(),
        Code::IncludeUnknown => format!("unknown header '{}'; its declarations are not available", f("header")),
        Code::AnnConflict => format!("conflicting annotations: {}", f("detail")),
        Code::AnnArg => format!("malformed annotation arguments: {}", f("detail")),
        Code::AnnUnknownType => format!("annotation names undeclared type '{}'", f("type")),
        Code::AnnRedundant => format!(
            "'{}' restates the reference kind the parameter type already implies",
            f("annotation")
        ),
        Code::ModelConflict => format!(
            "declaration of '{}' conflicts with its built-in library model",
            f("name")
        ),
        Code::OptDeref => {
            let what = if p.get("role").map(String::as_str) == Some("index") {
                "used as an index"
            } else {
                "dereferenced"
            };
            format!(
                "'{}' may hold the optional value {} and is {} without an optionality check",
                f("place"),
                f("sentinel"),
                what
            )
        }
        Code::OptArg => format!(
            "'{}' may hold the optional value {} but parameter '{}' of '{}' is not optional",
            f("place"),
            f("sentinel"),
            f("param"),
            f("callee")
        ),
        Code::OptRet => format!(
            "returned value may hold the optional value {} but the return type of '{}' is not optional",
            f("sentinel"),
            f("function")
        ),
        Code::UninitUse => format!("use of {} resource '{}'", f("actual"), f("place")),
        Code::UseAfterMove => format!("'{}' is used after its ownership was moved", f("place")),
        Code::UseAfterRelease => format!("'{}' refers to a resource that has been released", f("place")),
        Code::OwnLeak => format!("the {} owned by '{}' is leaked here", f("resource-class"), f("place")),
        Code::OwnUnclear => format!(
            "'{}' has no ownership annotations: does it take ownership of the {} owned by '{}'?",
            f("callee"),
            f("resource-class"),
            f("place")
        ),
        Code::ReleaseInvalid => format!(
            "'{}' cannot be passed to '{}': {}",
            f("place"),
            f("callee"),
            f("detail")
        ),
        Code::FiniMissing => format!("missing finalization of '{}' of type '{}'", f("place"), f("type")),
        Code::NominalOp => match p.get("rhs") {
            Some(rhs) => format!(
                "{} not permitted between nominal types '{}' and '{}'",
                f("operation"),
                f("type"),
                rhs
            ),
            None => format!("{} not permitted on nominal type '{}'", f("operation"), f("type")),
        },
        Code::NominalMix => format!(
            "value of type '{}' used where '{}' is required",
            f("actual"),
            f("expected")
        ),
        Code::ValRange => format!(
            "returned value {} is not within the declared range {}",
            f("actual"),
            f("expected")
        ),
        Code::PreViolation => format!(
            "precondition '{}' of '{}' may not hold: '{}' is {}",
            f("expected"),
            f("callee"),
            f("property"),
            f("actual")
        ),
        Code::PostViolation => format!(
            "postcondition violated at return: property '{}' of '{}' is {}, expected {}",
            f("property"),
            f("place"),
            f("actual"),
            f("expected")
        ),
        Code::UnsafeAccess => format!(
            "access to {} with unsafety kind \"{}\" outside a checked or unchecked block",
            f("what"),
            f("kind")
        ),
        Code::UnsafePropagate => format!(
            "unchecked \"{}\" statement in '{}', which is not annotated e_unsafe(\"{}\")",
            f("kind"),
            f("function"),
            f("kind")
        ),
        Code::ConstCast => format!("cast discards the const qualification of '{}'", f("place")),
        Code::Unreachable => "statement is unreachable".to_string(),
    }
}

/// One line per diagnostic: `file:line:col: severity: CODE: message`.
///
/// When `sources` is given, each line is followed by the offending source
/// line and a caret marker.
pub fn render_text(diags: &[Diagnostic], sources: Option<&BTreeMap<String, String>>) -> String {
    let mut out = String::new();
    for d in diags {
        out.push_str(&format!(
            "{}:{}:{}: {}: {}: {}\n",
            d.file, d.span.line, d.span.col, d.severity, d.code, d.message
        ));
        if let Some(line) = sources
            .and_then(|s| s.get(&d.file))
            .and_then(|text| text.lines().nth(d.span.line.saturating_sub(1) as usize))
        {
            let width = (d.span.len as usize)
                .min(line.chars().count().saturating_sub(d.span.col as usize - 1))
                .max(1);
            out.push_str(&format!(
                "  {}\n  {}{}\n",
                line,
                " ".repeat(d.span.col as usize - 1),
                "^".repeat(width)
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct JsonDiagnostic<'a> {
    file: &'a str,
    line: u32,
    col: u32,
    length: u32,
    code: &'a str,
    severity: &'a str,
    message: &'a str,
    payload: &'a Payload,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    version: u32,
    diagnostics: Vec<JsonDiagnostic<'a>>,
}

/// The stable machine interface: a single newline-terminated JSON document.
pub fn render_json(diags: &[Diagnostic]) -> String {
    let report = JsonReport {
        version: 1,
        diagnostics: diags
            .iter()
            .map(|d| JsonDiagnostic {
                file: &d.file,
                line: d.span.line,
                col: d.span.col,
                length: d.span.len,
                code: d.code.as_str(),
                severity: d.severity.as_str(),
                message: &d.message,
                payload: &d.payload,
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&report).expect("diagnostics serialize");
    s.push('\n');
    s
}
