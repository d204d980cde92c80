//! Machine-readable diagnostics.

use crusted::diagnostics::render_json;
use crusted::driver::check_source;

const SOURCE: &str = r#"#include <stdlib.h>

void fill(int n) {
  char *p = (char *) malloc(16U);
  p[0] = 'x';
  if (n > 0)
    free(p);
}
"#;

fn main() {
    let report = check_source("fill.c", SOURCE);
    println!("{}", render_json(&report.diagnostics));
}
