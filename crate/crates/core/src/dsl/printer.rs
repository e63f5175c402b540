use super::ast::{Expr, UnaryOp, Value};

/// Renders an expression fully parenthesized. The output parses back to an
/// identical tree.
pub fn pretty_print(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_expr(expr: &Expr, out: &mut String) {
    match expr {
        Expr::Literal(v) => out.push_str(&v.to_string()),
        Expr::Identifier(name) => out.push_str(name),
        Expr::Unary(UnaryOp::Not, child) => {
            out.push_str("(not ");
            write_expr(child, out);
            out.push(')');
        }
        Expr::Unary(UnaryOp::Negate, child) => {
            out.push_str("(-");
            // `-5` would fold into a literal, so keep the operand grouped
            if matches!(**child, Expr::Literal(Value::Number(_))) {
                out.push('(');
                write_expr(child, out);
                out.push(')');
            } else {
                write_expr(child, out);
            }
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            out.push('(');
            write_expr(l, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(r, out);
            out.push(')');
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(arg, out);
            }
            out.push(')');
        }
    }
}
