//! Built-in annotated models of the supported library headers.
//!
//! Each header's model is written as annotated declarations and read with
//! the ordinary frontend, so a model means exactly what the same text would
//! mean in a user file.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::annotations::tables::{AnnotatedSignature, Tables, TypeProps, TypedefInfo};
use crate::annotations::types::QualType;
use crate::frontend::{parse_source, Library};

/// Typedef names the parser must recognize as types before any table is
/// built. Whether a use is legal depends on the included headers.
pub const LIBRARY_TYPE_NAMES: &[&str] = &[
    "size_t",
    "ssize_t",
    "FILE",
    "fd_t",
    "fd_own_t",
    "fd_opt_own_t",
    "fp_t",
    "fp_own_t",
    "fp_opt_own_t",
];

const FD_TYPES: &str = "\
typedef int e_type e_val(e_geq(0)) fd_t;
typedef fd_t e_own fd_own_t;
typedef fd_own_t e_opt(-1) fd_opt_own_t;
";

const STDLIB: &str = "\
void * e_opt_hown e_uninit malloc(size_t size);
void * e_opt_hown calloc(size_t nmemb, size_t size);
void free(void * e_opt_hown e_release ptr);
";

const FCNTL: &str = "fd_opt_own_t open(const char *path, int oflag);\n";

const UNISTD: &str = "\
int e_val(e_range(-1, 0)) close(fd_own_t fildes);
ssize_t e_opt(-1) e_val(e_geq(0)) read(fd_t fildes, void * e_init buf, size_t nbyte);
";

const STDIO: &str = "\
typedef struct FILE FILE;
e_declprops(FILE, e_unsafe(\"FILE\"));
typedef FILE * fp_t;
typedef fp_t e_own fp_own_t;
typedef fp_own_t e_opt(NULL) fp_opt_own_t;
fp_opt_own_t fopen(const char * restrict filename, const char * restrict mode);
int e_val(e_eq(0) || e_eq(EOF)) fclose(fp_own_t fp);
int puts(const char *s);
";

const ERRNO: &str = "extern int errno;\n";

const STRING: &str = "\
size_t strlen(const char *s);
void *memset(void *s, int c, size_t n);
void *memcpy(void * restrict dst, const void * restrict src, size_t n);
";

/// The annotated declaration text of a library's model.
pub fn model_source(lib: Library) -> String {
    match lib {
        Library::Stdlib => STDLIB.to_string(),
        Library::Fcntl => format!("{FD_TYPES}{FCNTL}"),
        Library::Unistd => format!("{FD_TYPES}{UNISTD}"),
        Library::Stdio => STDIO.to_string(),
        Library::Errno => ERRNO.to_string(),
        Library::String => STRING.to_string(),
        Library::Crusted => String::new(),
    }
}

/// Argument positions that give the size of the block a function allocates.
fn alloc_size_args(name: &str) -> Vec<usize> {
    match name {
        "malloc" => vec![0],
        "calloc" => vec![0, 1],
        _ => Vec::new(),
    }
}

/// Resource class for owning values whose type chain contains `name`.
pub fn resource_class_for_type(name: &str) -> Option<&'static str> {
    match name {
        "fd_t" | "fd_own_t" | "fd_opt_own_t" => Some("open-file-description"),
        "FILE" | "fp_t" | "fp_own_t" | "fp_opt_own_t" => Some("stream"),
        _ => None,
    }
}

#[derive(Clone, Debug)]
pub struct ModelFunction {
    pub library: Library,
    pub signature: AnnotatedSignature,
    pub alloc_size_args: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ModelTypedef {
    pub library: Library,
    pub info: TypedefInfo,
}

#[derive(Clone, Debug, Default)]
pub struct LibraryModel {
    pub functions: BTreeMap<String, ModelFunction>,
    /// In declaration order, so parents precede children.
    pub typedefs: Vec<ModelTypedef>,
    pub type_props: BTreeMap<String, (Library, TypeProps)>,
    pub globals: BTreeMap<String, (Library, QualType)>,
}

fn build_library(lib: Library, model: &mut LibraryModel) {
    let src = model_source(lib);
    let (tu, diags) = parse_source(&src);
    assert!(diags.is_empty(), "model for {lib} does not parse: {diags:?}");
    let mut tables = Tables::default();
    let mut diags = Vec::new();
    tables.add_unit(&tu, &mut diags);
    assert!(diags.is_empty(), "model for {lib} is inconsistent: {diags:?}");
    let mut order: Vec<&String> = Vec::new();
    for item in &tu.items {
        if let crate::frontend::ast::ItemKind::Typedef(d) = &item.kind {
            for id in &d.declarators {
                if let Some((name, _)) = tables.typedefs.get_key_value(id.declarator.name()) {
                    order.push(name);
                }
            }
        }
    }
    for name in order {
        model.typedefs.push(ModelTypedef {
            library: lib,
            info: tables.typedefs[name].clone(),
        });
    }
    for (k, p) in &tables.type_props {
        model.type_props.insert(k.clone(), (lib, p.clone()));
    }
    for (k, ty) in &tables.globals {
        model.globals.insert(k.clone(), (lib, ty.clone()));
    }
    for (name, f) in &tables.functions {
        model.functions.insert(
            name.clone(),
            ModelFunction {
                library: lib,
                signature: f.signature.clone(),
                alloc_size_args: alloc_size_args(name),
            },
        );
    }
}

/// The models of all supported headers, built once.
pub fn builtin_models() -> &'static LibraryModel {
    static MODELS: OnceLock<LibraryModel> = OnceLock::new();
    MODELS.get_or_init(|| {
        let mut model = LibraryModel::default();
        for lib in Library::ALL {
            build_library(*lib, &mut model);
        }
        model
    })
}
