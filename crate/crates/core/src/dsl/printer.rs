//! Canonical pretty-printer. Output re-parses to a structurally equal tree.

use std::fmt::Write as _;

use super::ast::*;

pub fn print_kernel(p: &KernelProgram) -> String {
    let mut out = String::new();
    let params: Vec<String> = p.params.iter().map(|a| format!("{} {}{}", a.elem.spelling(), a.name, dims_text(&a.dims))).collect();
    let _ = writeln!(out, "void {}({}) {{", p.name, params.join(", "));
    print_block(&mut out, &p.body, 1);
    out.push_str("}\n");
    out
}

fn dims_text(dims: &[Expr]) -> String {
    dims.iter().map(|d| format!("[{}]", print_expr(d))).collect()
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_block(out: &mut String, stmts: &[Stmt], level: usize) {
    for s in stmts {
        print_stmt(out, s, level);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match s {
        Stmt::Decl(d) => {
            if d.is_static {
                out.push_str("static ");
            }
            if d.is_const {
                out.push_str("const ");
            }
            let _ = write!(out, "{} {}{}", d.ty.spelling(), d.name, dims_text(&d.dims));
            match &d.init {
                Some(Init::Expr(e)) => {
                    let _ = write!(out, " = {}", print_expr(e));
                }
                Some(Init::List(items)) => {
                    let items: Vec<String> = items.iter().map(print_expr).collect();
                    let _ = write!(out, " = {{{}}}", items.join(", "));
                }
                None => {}
            }
            out.push_str(";\n");
        }
        Stmt::Assign { target, op, value, .. } => {
            let _ = writeln!(out, "{} {} {};", print_expr(target), op.symbol(), print_expr(value));
        }
        Stmt::Expr { expr, .. } => {
            let _ = writeln!(out, "{};", print_expr(expr));
        }
        Stmt::For(l) => {
            let decl = l.var_ty.map(|t| format!("{} ", t.spelling())).unwrap_or_default();
            let step = match &l.step {
                LoopStep::Inc => format!("{}++", l.var),
                LoopStep::Dec => format!("{}--", l.var),
                LoopStep::Add(e) => format!("{} += {}", l.var, print_expr(e)),
                LoopStep::Sub(e) => format!("{} -= {}", l.var, print_expr(e)),
            };
            let _ = writeln!(
                out,
                "for ({decl}{v} = {init}; {v} {cmp} {bound}; {step}) {{",
                v = l.var,
                init = print_expr(&l.init),
                cmp = l.cmp.symbol(),
                bound = print_expr(&l.bound),
            );
            print_block(out, &l.body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::If { cond, then_body, else_body, .. } => {
            print_if(out, cond, then_body, else_body.as_deref(), level);
            out.push('\n');
        }
        Stmt::Block(b) => {
            out.push_str("{\n");
            print_block(out, b, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
    }
}

fn print_if(out: &mut String, cond: &Expr, then_body: &[Stmt], else_body: Option<&[Stmt]>, level: usize) {
    let _ = writeln!(out, "if ({}) {{", print_expr(cond));
    print_block(out, then_body, level + 1);
    indent(out, level);
    out.push('}');
    match else_body {
        Some([Stmt::If { cond, then_body, else_body, .. }]) => {
            out.push_str(" else ");
            print_if(out, cond, then_body, else_body.as_deref(), level);
        }
        Some(e) => {
            out.push_str(" else {\n");
            print_block(out, e, level + 1);
            indent(out, level);
            out.push('}');
        }
        None => {}
    }
}

const PREC_TERNARY: u8 = 0;
const PREC_UNARY: u8 = 11;
const PREC_POSTFIX: u8 = 12;
const PREC_PRIMARY: u8 = 13;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Ternary(..) => PREC_TERNARY,
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) | Expr::Cast(..) | Expr::AddrOf(_) => PREC_UNARY,
        Expr::Index { .. } | Expr::Call { .. } => PREC_POSTFIX,
        _ => PREC_PRIMARY,
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, PREC_TERNARY);
    s
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    if prec(e) < min_prec {
        out.push('(');
        write_expr(out, e, PREC_TERNARY);
        out.push(')');
        return;
    }
    match e {
        Expr::Int(lit) => {
            if lit.hex {
                let _ = write!(out, "0x{:x}", lit.value);
            } else {
                let _ = write!(out, "{}", lit.value);
            }
            if lit.unsigned {
                out.push('U');
            }
        }
        Expr::Float { value, single } => {
            let _ = write!(out, "{value:?}");
            if *single {
                out.push('f');
            }
        }
        Expr::Ident(n) => out.push_str(n),
        Expr::Index { base, index } => {
            write_expr(out, base, PREC_POSTFIX);
            out.push('[');
            write_expr(out, index, PREC_TERNARY);
            out.push(']');
        }
        Expr::AddrOf(inner) => {
            out.push('&');
            write_expr(out, inner, PREC_UNARY);
        }
        Expr::Unary(op, inner) => {
            out.push_str(op.symbol());
            // Avoid `--x` lexing as a decrement.
            let clash = *op == UnOp::Neg && matches!(inner.as_ref(), Expr::Unary(UnOp::Neg, _));
            if clash {
                out.push('(');
                write_expr(out, inner, PREC_TERNARY);
                out.push(')');
            } else {
                write_expr(out, inner, PREC_UNARY);
            }
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            write_expr(out, l, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, r, p + 1);
        }
        Expr::Ternary(c, a, b) => {
            write_expr(out, c, 1);
            out.push_str(" ? ");
            write_expr(out, a, PREC_TERNARY);
            out.push_str(" : ");
            write_expr(out, b, PREC_TERNARY);
        }
        Expr::Cast(ty, inner) => {
            let _ = write!(out, "({})", ty.spelling());
            write_expr(out, inner, PREC_UNARY);
        }
        Expr::SizeOf(ty) => {
            let _ = write!(out, "sizeof({})", ty.spelling());
        }
        Expr::Call { name, args, .. } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, PREC_TERNARY);
            }
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_kernel;

    #[test]
    fn single_empty_loop_is_byte_stable() {
        let src = "void test() { for (int_fast32_t i = 0; i < 4; i++) { } }";
        let a = print_kernel(&parse_kernel(src).unwrap());
        let b = print_kernel(&parse_kernel(src).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, "void test() {\n  for (int_fast32_t i = 0; i < 4; i++) {\n  }\n}\n");
    }

    #[test]
    fn hex_literal_stays_hex() {
        let src = "void test() { uint32_t f = 0x40000000; }";
        let p = parse_kernel(src).unwrap();
        let text = print_kernel(&p);
        assert!(text.contains("0x40000000"));
        assert_eq!(parse_kernel(&text).unwrap(), p);
    }

    #[test]
    fn parens_follow_associativity() {
        let src = "void test() { uint32_t x = a - (b - c) + (d << 2) * 3; }";
        let p = parse_kernel(src).unwrap();
        let text = print_kernel(&p);
        assert!(text.contains("a - (b - c) + (d << 2) * 3"), "{text}");
        assert_eq!(parse_kernel(&text).unwrap(), p);
    }

    #[test]
    fn else_if_chain() {
        let src = "void test() { if (a) { fence(); } else if (b) { fence(); } else { fence(); } }";
        let p = parse_kernel(src).unwrap();
        let text = print_kernel(&p);
        assert!(text.contains("} else if (b) {"));
        assert_eq!(parse_kernel(&text).unwrap(), p);
    }

    #[test]
    fn double_negation() {
        let src = "void test() { int x = -(-y); }";
        let p = parse_kernel(src).unwrap();
        assert_eq!(parse_kernel(&print_kernel(&p)).unwrap(), p);
    }
}
