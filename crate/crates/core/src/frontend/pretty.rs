//! Prints a syntax tree back to source text.
//!
//! The output is token-faithful: re-tokenizing it yields the original token
//! stream (modulo comments and whitespace). With [`Annotations::Strip`] every
//! annotation is omitted, which gives the annotation-free projection used to
//! compare a file with its macro-expanded form.

use super::ast::*;
use crate::annotations::Annotation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Annotations {
    Keep,
    Strip,
}

struct Printer {
    out: String,
    mode: Annotations,
    indent: usize,
    line_start: bool,
}

pub fn print_unit(tu: &TranslationUnit, mode: Annotations) -> String {
    let mut p = Printer {
        out: String::new(),
        mode,
        indent: 0,
        line_start: true,
    };
    for item in &tu.items {
        p.item(item);
    }
    p.out
}

pub fn print_expr(e: &Expr) -> String {
    let mut p = Printer {
        out: String::new(),
        mode: Annotations::Keep,
        indent: 0,
        line_start: true,
    };
    p.expr(e);
    p.out
}

impl Printer {
    fn tok(&mut self, s: &str) {
        if self.line_start {
            self.out.push_str(&"  ".repeat(self.indent));
            self.line_start = false;
        } else {
            self.out.push(' ');
        }
        self.out.push_str(s);
    }

    fn newline(&mut self) {
        if !self.line_start {
            self.out.push('\n');
            self.line_start = true;
        }
    }

    fn annotation(&mut self, a: &Annotation) {
        if self.mode == Annotations::Keep {
            for (_, lexeme) in &a.raw {
                self.tok(lexeme);
            }
        }
    }

    fn item(&mut self, item: &Item) {
        match &item.kind {
            ItemKind::Include(inc) => {
                self.tok("#");
                self.tok("include");
                if inc.system {
                    self.tok(&format!("<{}>", inc.header));
                } else {
                    self.tok(&format!("\"{}\"", inc.header));
                }
            }
            ItemKind::Typedef(d) | ItemKind::FunctionDecl(d) | ItemKind::GlobalVar(d) => self.declaration(d),
            ItemKind::TagDefinition(specs) => {
                self.specs(specs);
                self.tok(";");
            }
            ItemKind::GlobalAnnotation(a) => {
                if self.mode == Annotations::Keep {
                    self.annotation(a);
                    self.tok(";");
                }
            }
            ItemKind::FunctionDef(f) => {
                self.specs(&f.specs);
                self.declarator(&f.declarator);
                self.block(&f.body);
            }
        }
        self.newline();
    }

    fn specs(&mut self, specs: &DeclSpecs) {
        for item in &specs.items {
            match item {
                SpecItem::Storage(s, _) => self.tok(s.as_str()),
                SpecItem::Qualifier(q, _) => self.tok(q.as_str()),
                SpecItem::TypeKeyword(k, _) => self.tok(k),
                SpecItem::TypedefName(id) => self.tok(&id.name),
                SpecItem::Struct(s) => {
                    self.tok("struct");
                    if let Some(n) = &s.name {
                        self.tok(&n.name);
                    }
                    if let Some(members) = &s.members {
                        self.tok("{");
                        for m in members {
                            self.declaration(m);
                        }
                        self.tok("}");
                    }
                }
                SpecItem::Enum(e) => {
                    self.tok("enum");
                    if let Some(n) = &e.name {
                        self.tok(&n.name);
                    }
                    if let Some(list) = &e.enumerators {
                        self.tok("{");
                        for (i, en) in list.iter().enumerate() {
                            if i > 0 {
                                self.tok(",");
                            }
                            self.tok(&en.name.name);
                            if let Some(v) = &en.value {
                                self.tok("=");
                                self.expr(v);
                            }
                        }
                        self.tok("}");
                    }
                }
                SpecItem::Annotation(a) => self.annotation(a),
            }
        }
    }

    fn pointers(&mut self, pointers: &[PointerLevel]) {
        for level in pointers {
            self.tok("*");
            for item in &level.items {
                match item {
                    PtrItem::Qualifier(q, _) => self.tok(q.as_str()),
                    PtrItem::Annotation(a) => self.annotation(a),
                }
            }
        }
    }

    fn declarator(&mut self, d: &Declarator) {
        self.pointers(&d.pointers);
        if let Some(n) = &d.name {
            self.tok(&n.name);
        }
        match &d.suffix {
            DeclSuffix::None => {}
            DeclSuffix::Array(size) => {
                self.tok("[");
                if let Some(e) = size {
                    self.expr(e);
                }
                self.tok("]");
            }
            DeclSuffix::Function { params, explicit_void } => {
                self.tok("(");
                if *explicit_void {
                    self.tok("void");
                }
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        self.tok(",");
                    }
                    self.specs(&p.specs);
                    self.declarator(&p.declarator);
                }
                self.tok(")");
            }
        }
    }

    fn declaration(&mut self, d: &Declaration) {
        self.specs(&d.specs);
        for (i, id) in d.declarators.iter().enumerate() {
            if i > 0 {
                self.tok(",");
            }
            self.declarator(&id.declarator);
            if let Some(init) = &id.init {
                self.tok("=");
                self.expr(init);
            }
        }
        self.tok(";");
    }

    fn block(&mut self, b: &Block) {
        self.tok("{");
        self.indent += 1;
        self.newline();
        for s in &b.stmts {
            self.stmt(s);
            self.newline();
        }
        self.indent -= 1;
        self.tok("}");
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Block(b) => self.block(b),
            StmtKind::Decl(d) => self.declaration(d),
            StmtKind::Expr(e) => {
                self.expr(e);
                self.tok(";");
            }
            StmtKind::If { cond, then, els } => {
                self.tok("if");
                self.tok("(");
                self.expr(cond);
                self.tok(")");
                self.stmt(then);
                if let Some(e) = els {
                    self.tok("else");
                    self.stmt(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.tok("while");
                self.tok("(");
                self.expr(cond);
                self.tok(")");
                self.stmt(body);
            }
            StmtKind::Return { value, .. } => {
                self.tok("return");
                if let Some(v) = value {
                    self.expr(v);
                }
                self.tok(";");
            }
            StmtKind::Empty => self.tok(";"),
            StmtKind::Annotated { annotation, body } => {
                self.annotation(annotation);
                self.stmt(body);
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(n) => self.tok(n),
            ExprKind::IntLit { text, .. } | ExprKind::FloatLit { text, .. } | ExprKind::CharLit { text, .. } => {
                self.tok(text)
            }
            ExprKind::StrLit(s) => self.tok(s),
            ExprKind::Paren(inner) => {
                self.tok("(");
                self.expr(inner);
                self.tok(")");
            }
            ExprKind::Unary { op, operand } => match op {
                UnaryOp::PostInc | UnaryOp::PostDec => {
                    self.expr(operand);
                    self.tok(op.as_str());
                }
                _ => {
                    self.tok(op.as_str());
                    self.expr(operand);
                }
            },
            ExprKind::Binary { op, lhs, rhs } => {
                self.expr(lhs);
                self.tok(op.as_str());
                self.expr(rhs);
            }
            ExprKind::Assign { lhs, rhs } => {
                self.expr(lhs);
                self.tok("=");
                self.expr(rhs);
            }
            ExprKind::Call { callee, args } => {
                self.tok(&callee.name);
                self.tok("(");
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.tok(",");
                    }
                    self.expr(a);
                }
                self.tok(")");
            }
            ExprKind::Index { base, index } => {
                self.expr(base);
                self.tok("[");
                self.expr(index);
                self.tok("]");
            }
            ExprKind::Member { base, field, arrow } => {
                self.expr(base);
                self.tok(if *arrow { "->" } else { "." });
                self.tok(&field.name);
            }
            ExprKind::Cast { ty, expr } => {
                self.tok("(");
                self.specs(&ty.specs);
                self.pointers(&ty.pointers);
                self.tok(")");
                self.expr(expr);
            }
        }
    }
}
