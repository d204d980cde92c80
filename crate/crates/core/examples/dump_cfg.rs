use crusted::annotations::build_annotation_tables;
use crusted::frontend::{parse_source, resolve_includes};
use crusted::ir::lower_unit;

const SOURCE: &str = r#"int clamp(int x, int hi) {
  int r = x;
  if (x < 0)
    r = 0;
  else if (x > hi)
    r = hi;
  while (r > 100)
    r = r - 100;
  return r;
}
"#;

fn main() {
    let (mut tu, diags) = parse_source(SOURCE);
    assert!(diags.is_empty(), "{diags:?}");
    let (libs, _) = resolve_includes(&mut tu);
    let (tables, _) = build_annotation_tables(&tu, &libs);
    let (cfgs, _) = lower_unit(&tu, &tables);
    for cfg in &cfgs {
        print!("{cfg}");
    }
}
