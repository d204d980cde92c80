//! Checks an in-memory source and prints the diagnostics as text.

use crusted::diagnostics::render_text;
use crusted::driver::check_source;

const SOURCE: &str = r#"#include <fcntl.h>
#include <unistd.h>

int first_byte(const char *path) {
  char c;
  int fd = open(path, O_RDONLY);
  if (fd == -1)
    return -1;
  if (read(fd, &c, 1U) != 1)
    return -1;
  close(fd);
  return c;
}
"#;

fn main() {
    let report = check_source("first_byte.c", SOURCE);
    print!("{}", render_text(&report.diagnostics, None));
    println!("{} diagnostic(s)", report.diagnostics.len());
}
