//! The numeric domain: unions of disjoint integer intervals.

use crusted::domains::MultiInterval;
use crusted::frontend::ast::BinaryOp;

fn main() {
    let a = MultiInterval::from_intervals([(-1, -1), (1, 10)]);
    let b = MultiInterval::range(2, 4);
    println!("a = {a}");
    println!("b = {b}");
    println!("a join b = {}", a.join(&b));
    println!("a meet b = {}", a.meet(&b));
    println!("a without -1 = {}", a.without(-1));

    for op in [BinaryOp::Add, BinaryOp::Mul, BinaryOp::Div] {
        let (r, _) = MultiInterval::binop(op, &a, &b);
        println!("a {op:?} b = {r}");
    }
    let (_, zero_div) = MultiInterval::binop(BinaryOp::Div, &b, &a);
    println!("b / a may divide by zero: {zero_div}");

    let mut w = MultiInterval::singleton(0);
    for step in 1..=3 {
        let next = w.join(&MultiInterval::singleton(step));
        w = w.widen(&next);
        println!("widening step {step}: {w}");
    }
}
