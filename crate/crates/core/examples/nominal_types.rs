//! Nominal types with declared operations, units-of-measure style.

use crusted::annotations::build_annotation_tables;
use crusted::diagnostics::render_text;
use crusted::driver::check_source;
use crusted::frontend::{parse_source, resolve_includes};

const SOURCE: &str = r#"#include <crusted.h>

typedef double e_type meters_t;
typedef double e_type seconds_t;
typedef double e_type speed_t;

e_bop(speed_t, meters_t, /, seconds_t);
e_bop(meters_t, meters_t, +, meters_t);

speed_t pace(meters_t a, meters_t b, seconds_t t) {
  meters_t d = a + b;
  speed_t ok = d / t;
  speed_t bad = t / d;
  return ok;
}
"#;

fn main() {
    let (mut tu, _) = parse_source(SOURCE);
    let (libs, _) = resolve_includes(&mut tu);
    let (tables, _) = build_annotation_tables(&tu, &libs);
    for ((op, l, r), res) in &tables.nominal.bops {
        println!("{l:?} {op} {r:?} -> {res:?}");
    }
    let report = check_source("pace.c", SOURCE);
    print!("{}", render_text(&report.diagnostics, None));
}
