use std::fmt::Write;

use sha2::{Digest, Sha256};

use super::ast::*;
use super::lexer::{escape, tokenize, Token};

const INDENT: &str = "    ";

/// Renders a unit as MiniJ source that parses back to the same AST
/// (positions aside).
pub fn print_unit(unit: &SourceUnit) -> String {
    let mut out = String::new();
    for (i, class) in unit.classes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_class(&mut out, class);
    }
    for (i, test) in unit.tests.iter().enumerate() {
        if i > 0 || !unit.classes.is_empty() {
            out.push('\n');
        }
        let _ = write!(out, "test {}() ", test.name);
        print_block(&mut out, &test.body, 0);
        out.push('\n');
    }
    out
}

pub fn print_class(out: &mut String, class: &ClassDecl) {
    let _ = write!(out, "class {}", class.name);
    if let Some(parent) = &class.superclass {
        let _ = write!(out, " extends {parent}");
    }
    out.push_str(" {\n");
    for field in &class.fields {
        let _ = writeln!(out, "{INDENT}{} {};", field.ty, field.name);
    }
    for method in &class.methods {
        out.push_str(INDENT);
        print_method(out, method);
        out.push('\n');
    }
    out.push_str("}\n");
}

pub fn print_method(out: &mut String, m: &MethodDecl) {
    if m.is_static() {
        out.push_str("static ");
    }
    if !m.is_ctor {
        match &m.ret {
            Some(t) => {
                let _ = write!(out, "{t} ");
            }
            None => out.push_str("void "),
        }
    }
    let params: Vec<String> = m.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
    let _ = write!(out, "{}({})", m.name, params.join(", "));
    if !m.throws.is_empty() {
        let _ = write!(out, " throws {}", m.throws.join(", "));
    }
    out.push(' ');
    print_block(out, &m.body, 1);
}

fn print_block(out: &mut String, block: &Block, depth: usize) {
    if block.stmts.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for stmt in &block.stmts {
        print_stmt(out, stmt, depth + 1);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

fn print_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    out.push_str(&INDENT.repeat(depth));
    print_stmt_inline(out, stmt, depth);
    out.push('\n');
}

fn print_stmt_inline(out: &mut String, stmt: &Stmt, depth: usize) {
    match &stmt.kind {
        StmtKind::Block(b) => print_block(out, b, depth),
        StmtKind::Local { ty, name, init } => {
            let _ = write!(out, "{ty} {name}");
            if let Some(e) = init {
                out.push_str(" = ");
                print_expr(out, e);
            }
            out.push(';');
        }
        StmtKind::Assign { target, value } => {
            print_expr(out, target);
            out.push_str(" = ");
            print_expr(out, value);
            out.push(';');
        }
        StmtKind::Step { target, op } => {
            print_expr(out, target);
            out.push_str(match op {
                StepOp::Inc => "++;",
                StepOp::Dec => "--;",
            });
        }
        StmtKind::If { cond, then, otherwise } => {
            out.push_str("if (");
            print_expr(out, cond);
            out.push_str(") ");
            print_nested(out, then, depth);
            if let Some(other) = otherwise {
                out.push_str(" else ");
                print_nested(out, other, depth);
            }
        }
        StmtKind::While { cond, body } => {
            out.push_str("while (");
            print_expr(out, cond);
            out.push_str(") ");
            print_nested(out, body, depth);
        }
        StmtKind::Return(value) => {
            out.push_str("return");
            if let Some(e) = value {
                out.push(' ');
                print_expr(out, e);
            }
            out.push(';');
        }
        StmtKind::Print(e) => {
            out.push_str("print(");
            print_expr(out, e);
            out.push_str(");");
        }
        StmtKind::Assert(e) => {
            out.push_str("assert(");
            print_expr(out, e);
            out.push_str(");");
        }
        StmtKind::SuperCall(args) => {
            out.push_str("super");
            print_args(out, args);
            out.push(';');
        }
        StmtKind::Expr(e) => {
            print_expr(out, e);
            out.push(';');
        }
    }
}

/// Branch and loop bodies: blocks stay inline, single statements are wrapped
/// so the output is unambiguous with respect to dangling `else`.
fn print_nested(out: &mut String, stmt: &Stmt, depth: usize) {
    match &stmt.kind {
        StmtKind::Block(b) => print_block(out, b, depth),
        _ => {
            out.push_str("{\n");
            print_stmt(out, stmt, depth + 1);
            out.push_str(&INDENT.repeat(depth));
            out.push('}');
        }
    }
}

fn print_args(out: &mut String, args: &[Expr]) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        print_expr(out, a);
    }
    out.push(')');
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    print_expr(&mut s, e);
    s
}

fn print_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Int(v) if *v < 0 => {
            let _ = write!(out, "({v})");
        }
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Str(s) => {
            let _ = write!(out, "\"{}\"", escape(s));
        }
        ExprKind::Null => out.push_str("null"),
        ExprKind::This => out.push_str("this"),
        ExprKind::Name(n) => out.push_str(n),
        ExprKind::Field { target, name } => {
            print_postfix_target(out, target);
            let _ = write!(out, ".{name}");
        }
        ExprKind::Call { target, name, args } => {
            if let Some(t) = target {
                print_postfix_target(out, t);
                out.push('.');
            }
            out.push_str(name);
            print_args(out, args);
        }
        ExprKind::New { class, args } => {
            let _ = write!(out, "new {class}");
            print_args(out, args);
        }
        ExprKind::Unary { op, operand } => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            let wrap = matches!(operand.kind, ExprKind::Binary { .. } | ExprKind::Unary { op: UnOp::Neg, .. })
                || matches!(operand.kind, ExprKind::Int(v) if v < 0);
            print_maybe_wrapped(out, operand, wrap);
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let wrap_l = matches!(&lhs.kind, ExprKind::Binary { op: l, .. } if l.precedence() < prec);
            let wrap_r = matches!(&rhs.kind, ExprKind::Binary { op: r, .. } if r.precedence() <= prec);
            print_maybe_wrapped(out, lhs, wrap_l);
            let _ = write!(out, " {} ", op.symbol());
            print_maybe_wrapped(out, rhs, wrap_r);
        }
    }
}

fn print_postfix_target(out: &mut String, target: &Expr) {
    let wrap = matches!(target.kind, ExprKind::Binary { .. } | ExprKind::Unary { .. });
    print_maybe_wrapped(out, target, wrap);
}

fn print_maybe_wrapped(out: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        out.push('(');
        print_expr(out, e);
        out.push(')');
    } else {
        print_expr(out, e);
    }
}

/// Normalized token sequence of a method body. Formatting, comments and
/// redundant parentheses never affect it; any change to the body's syntax
/// tree does.
pub fn canonical_body(decl: &MethodDecl) -> Vec<Token> {
    block_tokens(&decl.body)
}

pub fn block_tokens(block: &Block) -> Vec<Token> {
    let mut text = String::new();
    print_block(&mut text, block, 0);
    let mut tokens: Vec<Token> =
        tokenize(&text).expect("printer output always lexes").into_iter().map(|s| s.token).collect();
    tokens.pop(); // Eof
    tokens
}

/// Hex SHA-256 over a token sequence.
pub fn token_digest(tokens: &[Token]) -> String {
    let mut hasher = Sha256::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            hasher.update(b" ");
        }
        hasher.update(t.to_string().as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;

    fn body_of(src: &str) -> Vec<Token> {
        let unit = parse(&format!("class K {{ void m() {src} }}"), "k.mj").unwrap();
        canonical_body(&unit.classes[0].methods[0])
    }

    #[test]
    fn whitespace_and_comments_are_ignored() {
        assert_eq!(body_of("{ x = 1; }"), body_of("{  x=1 ; /*note*/ }"));
    }

    #[test]
    fn literal_change_is_visible() {
        assert_ne!(body_of("{ x = 1; }"), body_of("{ x = 2; }"));
    }

    #[test]
    fn added_call_is_visible() {
        assert_ne!(body_of("{ bar(\"hello\"); }"), body_of("{}"));
    }

    #[test]
    fn redundant_parens_are_ignored() {
        assert_eq!(body_of("{ x = (1 + (2 * 3)); }"), body_of("{ x = 1 + 2 * 3; }"));
        assert_ne!(body_of("{ x = (1 + 2) * 3; }"), body_of("{ x = 1 + 2 * 3; }"));
    }

    #[test]
    fn printed_unit_reparses_identically() {
        let src = r#"
            class A { Int n; A(Int k) { n = k; } Int get() { return n; } }
            class B extends A {
                B() { super(3); }
                static Bool check(Int a, Int b) throws Oops {
                    if (a < b && !(a == 0)) return true; else { return a - (b - 1) >= -(-a); }
                }
            }
            test T() { A a = new B(); Int i = 0; while (i < 3) i++; print("x\ty" + a.get()); assert(B.check(1, 2)); }
        "#;
        let unit = parse(src, "r.mj").unwrap();
        let printed = print_unit(&unit);
        let again = parse(&printed, "r.mj").unwrap();
        assert_eq!(print_unit(&again), printed);
        for (c1, c2) in unit.classes.iter().zip(&again.classes) {
            for (m1, m2) in c1.methods.iter().zip(&c2.methods) {
                assert_eq!(canonical_body(m1), canonical_body(m2));
            }
        }
    }

    #[test]
    fn digest_is_hex_sha256() {
        let d = token_digest(&body_of("{}"));
        assert_eq!(d.len(), 64);
        assert_ne!(d, token_digest(&body_of("{ x = 1; }")));
    }
}
