//! Shows the abstract state at every program point of a function that
//! acquires, guards and releases a heap block.

use crusted::driver::check_source;

const SOURCE: &str = r#"#include <stdlib.h>

int sum3(void) {
  int *v = (int *) calloc(3U, 4U);
  if (v == NULL)
    return -1;
  v[0] = 1;
  int s = v[0] + v[1];
  free(v);
  return s;
}
"#;

fn main() {
    let report = check_source("sum3.c", SOURCE);
    for r in &report.results {
        print!("{}", r.dump_states());
        println!("converged: {}, diagnostics: {}", r.converged, r.diagnostics.len());
    }
}
