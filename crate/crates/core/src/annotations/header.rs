//! The header that makes annotated sources compile with any C compiler.

use super::registry::{Form, REGISTRY};

/// Name of the object declared by the expansion of file-scope annotations.
/// Redeclaring an `extern` object any number of times is valid C.
pub const GLOBAL_ANNOTATION_DECL: &str = "e_crusted_global_annotation";

/// Emits `crusted.h`. Every annotation becomes a macro expanding to nothing,
/// except the file-scope ones, which expand to an `extern int` declaration
/// so that the trailing `;` stays legal. The output is byte-stable.
pub fn emit_crusted_header() -> String {
    let mut out = String::new();
    out.push_str("#ifndef CRUSTED_H\n#define CRUSTED_H\n\n");
    for (name, form) in REGISTRY {
        let line = match form {
            Form::Flag => format!("#define {name}\n"),
            Form::Call | Form::Predicate => format!("#define {name}(...)\n"),
            Form::Global => format!("#define {name}(...) extern int {GLOBAL_ANNOTATION_DECL}\n"),
        };
        out.push_str(&line);
    }
    out.push_str("\n#endif /* CRUSTED_H */\n");
    out
}
