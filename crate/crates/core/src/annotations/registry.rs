//! The reserved annotation names.

/// How an annotation is written.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    /// Written bare, e.g. `e_hown`.
    Flag,
    /// Takes a parenthesized argument list, e.g. `e_opt(NULL)`.
    Call,
    /// Only valid inside an `e_val(...)` argument list.
    Predicate,
    /// A file-scope declaration followed by `;`.
    Global,
}

pub const REGISTRY: &[(&str, Form)] = &[
    ("e_hown", Form::Flag),
    ("e_own", Form::Flag),
    ("e_opt_hown", Form::Flag),
    ("e_excl", Form::Flag),
    ("e_shar", Form::Flag),
    ("e_type", Form::Flag),
    ("e_init", Form::Flag),
    ("e_uninit", Form::Flag),
    ("e_fini", Form::Flag),
    ("e_release", Form::Flag),
    ("e_opt", Form::Call),
    ("e_val", Form::Call),
    ("e_in", Form::Call),
    ("e_out", Form::Call),
    ("e_unsafe", Form::Call),
    ("e_checked", Form::Call),
    ("e_unchecked", Form::Call),
    ("e_geq", Form::Predicate),
    ("e_range", Form::Predicate),
    ("e_eq", Form::Predicate),
    ("e_bop", Form::Global),
    ("e_uop", Form::Global),
    ("e_declprops", Form::Global),
];

pub fn form_of(name: &str) -> Option<Form> {
    REGISTRY.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

pub fn is_annotation_name(name: &str) -> bool {
    form_of(name).is_some()
}
