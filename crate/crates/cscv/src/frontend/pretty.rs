//! Pretty-printer for contracts. Output re-parses to a structurally
//! identical tree, which the round-trip tests rely on.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(contract: &ContractAST) -> String {
    let mut out = String::new();
    if contract.wrap256 {
        out.push_str("pragma wrap256;\n\n");
    }
    let _ = writeln!(out, "contract {} {{", contract.name);
    for v in &contract.state_vars {
        let _ = write!(out, "    state {}: {}", v.name, v.ty);
        if let Some(init) = &v.init {
            let _ = write!(out, " = {init}");
        }
        out.push_str(";\n");
    }
    for f in &contract.functions {
        out.push('\n');
        let kind = match f.kind {
            FnKind::External => "external",
            FnKind::View => "view",
        };
        let params: Vec<String> =
            f.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
        let _ = write!(out, "    {kind} fn {}({})", f.name, params.join(", "));
        if let Some(ret) = &f.ret {
            let _ = write!(out, " -> {ret}");
        }
        out.push_str(" {\n");
        for stmt in &f.body {
            write_stmt(&mut out, stmt, 2);
        }
        out.push_str("    }\n");
    }
    out.push_str("}\n");
    out
}

fn write_stmt(out: &mut String, stmt: &Stmt, indent: usize) {
    let pad = "    ".repeat(indent);
    match stmt {
        Stmt::Require(cond) => {
            let _ = writeln!(out, "{pad}require({});", expr_text(cond));
        }
        Stmt::Assign { target, value } => {
            let lhs = match target {
                LValue::Var(n) => n.clone(),
                LValue::MapEntry { map, key } => format!("{map}[{}]", expr_text(key)),
            };
            let _ = writeln!(out, "{pad}{lhs} = {};", expr_text(value));
        }
        Stmt::Call { target, amount } => {
            let _ = writeln!(out, "{pad}call {} {};", expr_text(target), expr_text(amount));
        }
        Stmt::If { cond, then_body, else_body } => {
            let _ = writeln!(out, "{pad}if ({}) {{", expr_text(cond));
            for s in then_body {
                write_stmt(out, s, indent + 1);
            }
            if else_body.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                for s in else_body {
                    write_stmt(out, s, indent + 1);
                }
                let _ = writeln!(out, "{pad}}}");
            }
        }
        Stmt::Return(None) => {
            let _ = writeln!(out, "{pad}return;");
        }
        Stmt::Return(Some(e)) => {
            let _ = writeln!(out, "{pad}return {};", expr_text(e));
        }
    }
}

/// Precedence levels, loosest to tightest; used to parenthesize minimally.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Or, ..) => 1,
        Expr::Binary(BinOp::And, ..) => 2,
        Expr::Binary(op, ..) if op.is_comparison() => 3,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 4,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 5,
        Expr::Unary(..) => 6,
        _ => 7,
    }
}

pub(crate) fn expr_text(e: &Expr) -> String {
    match e {
        Expr::Lit(lit) => lit.to_string(),
        Expr::Ident(name) => name.clone(),
        Expr::MapIndex { map, key } => format!("{map}[{}]", expr_text(key)),
        Expr::MsgSender => "msg.sender".into(),
        Expr::MsgValue => "msg.value".into(),
        Expr::ViewCall(name) => format!("{name}()"),
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            let body = expr_text(inner);
            if prec(inner) < prec(e) {
                format!("{sym}({body})")
            } else {
                format!("{sym}{body}")
            }
        }
        Expr::Binary(op, a, b) => {
            let my = prec(e);
            let left = if prec(a) < my { format!("({})", expr_text(a)) } else { expr_text(a) };
            // Operators are left-associative (comparisons do not chain), so
            // a right child at the same level needs parentheses.
            let right = if prec(b) <= my { format!("({})", expr_text(b)) } else { expr_text(b) };
            format!("{left} {op} {right}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_contract;

    #[test]
    fn round_trip_is_idempotent() {
        let src = r#"
            pragma wrap256;
            contract R {
                state x: int = 3;
                state flag: bool = true;
                state owner: address = 0xc1;
                state m: map<address, int>;

                external fn f(a: int, who: address) {
                    require(a > 0 && !flag || m[who] == 0);
                    m[who] = m[who] + (a - 1) * 2;
                    if (a / 2 >= 1) {
                        call who a;
                    } else {
                        x = -a;
                    }
                }

                view fn g() -> int {
                    return x - (1 - 2) - 3;
                }
            }
        "#;
        let first = parse_contract(src).unwrap();
        let printed = pretty_print(&first);
        let second = parse_contract(&printed).unwrap();
        assert_eq!(first, second, "pretty-printed source must re-parse identically");
        assert_eq!(printed, pretty_print(&second));
    }
}
