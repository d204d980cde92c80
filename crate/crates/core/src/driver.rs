//! Per-file pipeline and the command-line driver.

use std::collections::BTreeMap;
use std::io::{IsTerminal, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::analysis::{analyze_function, AnalysisResult};
use crate::annotations::build_annotation_tables;
use crate::annotations::header::emit_crusted_header;
use crate::diagnostics::{promote_warnings, render_json, render_text, sort_diagnostics, Diagnostic, Severity};
use crate::frontend::{parse_source, resolve_includes};
use crate::ir::{lower_unit, Cfg};

/// Everything produced for one translation unit.
#[derive(Clone, Debug)]
pub struct FileReport {
    pub file: String,
    /// Sorted and deduplicated.
    pub diagnostics: Vec<Diagnostic>,
    pub cfgs: Vec<Cfg>,
    pub results: Vec<AnalysisResult>,
}

/// Runs frontend, annotation resolution, lowering and analysis on one
/// source text.
pub fn check_source(file: &str, source: &str) -> FileReport {
    let (mut tu, mut diags) = parse_source(source);
    let (libs, d) = resolve_includes(&mut tu);
    diags.extend(d);
    let (tables, d) = build_annotation_tables(&tu, &libs);
    diags.extend(d);
    let (cfgs, d) = lower_unit(&tu, &tables);
    diags.extend(d);
    let results: Vec<AnalysisResult> = cfgs.iter().map(|c| analyze_function(c, &tables)).collect();
    for r in &results {
        diags.extend(r.diagnostics.iter().cloned());
    }
    for d in &mut diags {
        d.file = file.to_string();
    }
    sort_diagnostics(&mut diags);
    FileReport {
        file: file.to_string(),
        diagnostics: diags,
        cfgs,
        results,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Static analyzer for C sources annotated with C-rusted annotations.
#[derive(Debug, Parser)]
#[command(name = "crusted-check", version)]
pub struct RunConfig {
    /// Source files to analyze.
    pub paths: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Report analysis warnings as errors.
    #[arg(long)]
    pub warn_as_error: bool,
    /// Write the annotation header (crusted.h) to PATH, or to stdout for `-`.
    #[arg(long, value_name = "PATH")]
    pub emit_header: Option<PathBuf>,
    /// Print the control-flow graph of every function.
    #[arg(long)]
    pub dump_cfg: bool,
    /// Print the abstract state at every program point.
    #[arg(long)]
    pub dump_states: bool,
    /// Files analyzed concurrently (default: one thread per input).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Print the source line and a caret under each text diagnostic.
    #[arg(long)]
    pub show_source: bool,
}

enum Input {
    Read(String, String),
    Unreadable(String, std::io::Error),
}

fn analyze_all(inputs: &[Input], jobs: usize) -> Vec<Option<FileReport>> {
    let jobs = jobs.clamp(1, inputs.len().max(1));
    let mut out: Vec<Option<FileReport>> = vec![None; inputs.len()];
    let chunk = inputs.len().div_ceil(jobs).max(1);
    std::thread::scope(|s| {
        for (ins, outs) in inputs.chunks(chunk).zip(out.chunks_mut(chunk)) {
            s.spawn(move || {
                for (i, o) in ins.iter().zip(outs.iter_mut()) {
                    if let Input::Read(name, text) = i {
                        *o = Some(check_source(name, text));
                    }
                }
            });
        }
    });
    out
}

fn styled(text: &str, color: bool) -> String {
    if !color {
        return text.to_string();
    }
    let mut out = String::new();
    for line in text.lines() {
        let mut l = line.to_string();
        for (sev, code) in [(": error: ", "31"), (": warning: ", "33"), (": note: ", "36")] {
            if let Some(i) = l.find(sev) {
                let word = &sev[2..sev.len() - 2];
                l = format!("{}: \x1b[1;{code}m{word}\x1b[0m: {}", &l[..i], &l[i + sev.len()..]);
                break;
            }
        }
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Runs the command line `argv` (including the program name). Returns the
/// process exit code: 0 when clean, 1 when diagnostics were reported, 2 on
/// usage errors or unreadable input.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    if let Some(path) = &cfg.emit_header {
        let header = emit_crusted_header();
        let written = if path.as_os_str() == "-" {
            out.write_all(header.as_bytes())
        } else {
            std::fs::write(path, header)
        };
        if let Err(e) = written {
            let _ = writeln!(err, "crusted-check: cannot write {}: {e}", path.display());
            return 2;
        }
        if cfg.paths.is_empty() {
            return 0;
        }
    }
    if cfg.paths.is_empty() {
        let _ = writeln!(
            err,
            "crusted-check: no input files\nUsage: crusted-check [OPTIONS] [PATHS]..."
        );
        return 2;
    }
    let inputs: Vec<Input> = cfg
        .paths
        .iter()
        .map(|p| {
            let name = p.display().to_string();
            match std::fs::read_to_string(p) {
                Ok(text) => Input::Read(name, text),
                Err(e) => Input::Unreadable(name, e),
            }
        })
        .collect();
    let mut status = 0;
    for i in &inputs {
        if let Input::Unreadable(name, e) = i {
            let _ = writeln!(err, "crusted-check: cannot read {name}: {e}");
            status = 2;
        }
    }
    let reports: Vec<FileReport> = analyze_all(&inputs, cfg.jobs.unwrap_or(inputs.len()))
        .into_iter()
        .flatten()
        .collect();
    let mut sorted: Vec<&FileReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.file.cmp(&b.file));
    for r in &sorted {
        if cfg.dump_cfg {
            for c in &r.cfgs {
                let _ = write!(out, "// {}\n{c}", r.file);
            }
        }
        if cfg.dump_states {
            for a in &r.results {
                let _ = write!(out, "// {}\n{}", r.file, a.dump_states());
            }
        }
    }
    let mut diags: Vec<Diagnostic> = sorted.iter().flat_map(|r| r.diagnostics.iter().cloned()).collect();
    sort_diagnostics(&mut diags);
    if cfg.warn_as_error {
        promote_warnings(&mut diags);
    }
    let rendered = match cfg.format {
        Format::Json => render_json(&diags),
        Format::Text => {
            let sources: BTreeMap<String, String> = inputs
                .iter()
                .filter_map(|i| match i {
                    Input::Read(n, t) => Some((n.clone(), t.clone())),
                    Input::Unreadable(..) => None,
                })
                .collect();
            let text = render_text(&diags, cfg.show_source.then_some(&sources));
            let color = std::env::var_os("CRUSTED_NO_COLOR").is_none() && std::io::stdout().is_terminal();
            styled(&text, color)
        }
    };
    let _ = out.write_all(rendered.as_bytes());
    if status == 0 && diags.iter().any(|d| d.severity != Severity::Note) {
        status = 1;
    }
    status
}
