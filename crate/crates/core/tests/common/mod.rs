#![allow(dead_code)]

pub mod expand;
pub mod laws;
pub mod oracle;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crusted::diagnostics::{render_text, Diagnostic};
use crusted::driver::{check_source, FileReport};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

/// Corpus sources as (path relative to the corpus directory, text), sorted.
pub fn corpus() -> Vec<(String, String)> {
    let root = corpus_dir();
    let mut out = Vec::new();
    let mut dirs = vec![root.clone()];
    while let Some(d) = dirs.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                dirs.push(p);
            } else if p.extension().is_some_and(|x| x == "c") {
                let rel = p.strip_prefix(&root).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, std::fs::read_to_string(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn source(rel: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(rel)).unwrap()
}

pub fn check(rel: &str) -> FileReport {
    check_source(rel, &source(rel))
}

pub fn text(diags: &[Diagnostic]) -> String {
    render_text(diags, None)
}

/// (code, line, col, len) of every diagnostic.
pub fn summary(diags: &[Diagnostic]) -> Vec<(String, u32, u32, u32)> {
    diags
        .iter()
        .map(|d| (d.code.to_string(), d.span.line, d.span.col, d.span.len))
        .collect()
}

/// Runs the driver in-process.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["crusted-check"];
    argv.extend_from_slice(args);
    let code = crusted::driver::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub struct Comparison {
    pub function: String,
    pub loop_free: bool,
    pub analyzed: BTreeSet<oracle::Finding>,
    /// `None` when the function was not enumerated.
    pub reference: Option<BTreeSet<oracle::Finding>>,
}

/// Analyzer findings and reference-checker findings for every function of
/// `src`.
pub fn oracle_comparison(src: &str) -> Vec<Comparison> {
    let (mut tu, _) = crusted::frontend::parse_source(src);
    let (libs, _) = crusted::frontend::resolve_includes(&mut tu);
    let (tables, _) = crusted::annotations::build_annotation_tables(&tu, &libs);
    let (cfgs, _) = crusted::ir::lower_unit(&tu, &tables);
    cfgs.iter()
        .map(|cfg| Comparison {
            function: cfg.function.clone(),
            loop_free: !cfg.has_loops(),
            analyzed: crusted::analysis::analyze_function(cfg, &tables)
                .diagnostics
                .iter()
                .map(|d| {
                    (
                        d.code,
                        d.span.line,
                        d.span.col,
                        d.place().unwrap_or_default().to_string(),
                    )
                })
                .collect(),
            reference: oracle::check(cfg, &tables),
        })
        .collect()
}

/// Compares every loop-free corpus function with the reference checker.
/// Returns the number of functions compared and one line per divergence.
pub fn oracle_divergences() -> (usize, Vec<String>) {
    let mut compared = 0;
    let mut diverged = Vec::new();
    for (file, src) in corpus() {
        for c in oracle_comparison(&src) {
            if !c.loop_free {
                continue;
            }
            let Some(reference) = c.reference else {
                diverged.push(format!("{file}:{}: too many paths to enumerate", c.function));
                continue;
            };
            compared += 1;
            if c.analyzed != reference {
                let missing: Vec<_> = reference.difference(&c.analyzed).collect();
                let extra: Vec<_> = c.analyzed.difference(&reference).collect();
                diverged.push(format!("{file}:{}: missing {missing:?} extra {extra:?}", c.function));
            }
        }
    }
    (compared, diverged)
}
