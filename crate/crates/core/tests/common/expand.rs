//! A minimal preprocessor for the emitted annotation header.

use std::collections::HashMap;

use crusted::annotations::header::{emit_crusted_header, GLOBAL_ANNOTATION_DECL};
use crusted::frontend::ast::ItemKind;
use crusted::frontend::pretty::{print_unit, Annotations};
use crusted::frontend::{parse_source, tokenize};

/// Object-like and function-like macros read from `#define` lines.
pub struct Macros(pub HashMap<String, (bool, String)>);

impl Macros {
    pub fn from_header(h: &str) -> Macros {
        let mut map = HashMap::new();
        for line in h.lines() {
            let Some(rest) = line.strip_prefix("#define ") else {
                continue;
            };
            let name_end = rest
                .find(|c: char| !(c.is_alphanumeric() || c == '_'))
                .unwrap_or(rest.len());
            let (name, tail) = rest.split_at(name_end);
            if name == "CRUSTED_H" {
                continue;
            }
            let entry = match tail.strip_prefix("(...)") {
                Some(body) => (true, body.trim().to_string()),
                None => (false, tail.trim().to_string()),
            };
            map.insert(name.to_string(), entry);
        }
        Macros(map)
    }

    /// Expands every macro use in `src`, leaving all other text in place.
    pub fn expand(&self, src: &str) -> String {
        let (toks, _) = tokenize(src);
        let mut out = String::new();
        let mut copied = 0usize;
        let mut i = 0;
        while i < toks.len() {
            let t = &toks[i];
            let Some((function_like, body)) = self.0.get(&t.lexeme) else {
                i += 1;
                continue;
            };
            let start = t.span.offset as usize;
            let mut end = start + t.span.len as usize;
            let mut next = i + 1;
            if *function_like {
                if !toks.get(next).is_some_and(|t| t.is_punct("(")) {
                    i += 1;
                    continue;
                }
                let mut depth = 0;
                while let Some(t) = toks.get(next) {
                    next += 1;
                    if t.is_punct("(") {
                        depth += 1;
                    } else if t.is_punct(")") {
                        depth -= 1;
                        if depth == 0 {
                            end = (t.span.offset + t.span.len) as usize;
                            break;
                        }
                    }
                }
            }
            out.push_str(&src[copied..start]);
            out.push_str(body);
            copied = end;
            i = next;
        }
        out.push_str(&src[copied..]);
        out
    }
}

pub fn projection(src: &str, drop_expansions: bool) -> String {
    let (mut tu, diags) = parse_source(src);
    assert!(diags.is_empty(), "{diags:?}\n{src}");
    if drop_expansions {
        tu.items.retain(|it| match &it.kind {
            ItemKind::GlobalVar(d) => !d
                .declarators
                .iter()
                .all(|x| x.declarator.name() == GLOBAL_ANNOTATION_DECL),
            _ => true,
        });
    }
    print_unit(&tu, Annotations::Strip)
}

/// Expands every corpus file that parses cleanly and compares its
/// annotation-free projection with the original one. Returns the number of
/// files compared.
pub fn check_corpus() -> Result<usize, String> {
    let macros = Macros::from_header(&emit_crusted_header());
    let mut compared = 0;
    for (file, src) in super::corpus() {
        if !parse_source(&src).1.is_empty() {
            continue;
        }
        let expanded = macros.expand(&src);
        let (toks, _) = tokenize(&expanded);
        if toks.iter().any(|t| macros.0.contains_key(&t.lexeme)) {
            return Err(format!("{file}: annotation left after expansion"));
        }
        let diags = parse_source(&expanded).1;
        if !diags.is_empty() {
            return Err(format!("{file}: expansion does not parse: {diags:?}"));
        }
        if projection(&src, false) != projection(&expanded, true) {
            return Err(format!("{file}: projections differ"));
        }
        compared += 1;
    }
    Ok(compared)
}
