//! Recognition of the library headers whose models are built in.

use std::collections::BTreeSet;
use std::fmt;

use super::ast::{ItemKind, TranslationUnit};
use crate::diagnostics::{Code, Diagnostic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Library {
    Fcntl,
    Unistd,
    Stdlib,
    Stdio,
    Errno,
    String,
    Crusted,
}

impl Library {
    pub const ALL: &'static [Library] = &[
        Library::Fcntl,
        Library::Unistd,
        Library::Stdlib,
        Library::Stdio,
        Library::Errno,
        Library::String,
        Library::Crusted,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Library::Fcntl => "fcntl.h",
            Library::Unistd => "unistd.h",
            Library::Stdlib => "stdlib.h",
            Library::Stdio => "stdio.h",
            Library::Errno => "errno.h",
            Library::String => "string.h",
            Library::Crusted => "crusted.h",
        }
    }

    pub fn from_header(header: &str) -> Option<Library> {
        Library::ALL.iter().copied().find(|l| l.header() == header)
    }
}

impl fmt::Display for Library {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.header().trim_end_matches(".h"))
    }
}

/// Removes include items, returning the recognized libraries. Quoted
/// includes are project headers and are never recognized.
pub fn resolve_includes(tu: &mut TranslationUnit) -> (BTreeSet<Library>, Vec<Diagnostic>) {
    let mut libs = BTreeSet::new();
    let mut diags = Vec::new();
    tu.items.retain(|item| {
        let ItemKind::Include(inc) = &item.kind else {
            return true;
        };
        match Library::from_header(&inc.header).filter(|_| inc.system) {
            Some(lib) => {
                libs.insert(lib);
            }
            None => diags.push(Diagnostic::new(
                Code::IncludeUnknown,
                item.span,
                [("header", inc.header.clone())],
            )),
        }
        false
    });
    (libs, diags)
}
