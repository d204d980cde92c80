//! Prints crusted.h, the header that turns every annotation into nothing so
//! annotated sources build with an ordinary C compiler.

fn main() {
    print!("{}", crusted::annotations::header::emit_crusted_header());
}
