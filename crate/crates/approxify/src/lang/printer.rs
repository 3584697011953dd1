//! Canonical source printer. `parse(pretty_print(p))` reproduces `p`
//! node for node (spans aside).

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    match p.output_decl {
        OutputKind::Numeric => out.push_str("output numeric;\n"),
        OutputKind::Text => out.push_str("output text;\n"),
        OutputKind::Image { rows, cols } => {
            let _ = writeln!(out, "output image({rows}, {cols});");
        }
    }
    if !p.globals.is_empty() {
        out.push('\n');
    }
    for g in &p.globals {
        let _ = write!(out, "var {}: {}", g.name, type_str(&g.ty));
        if let Some(init) = &g.init {
            let _ = write!(out, " = {}", expr_str(init, p));
        }
        out.push_str(";\n");
    }
    for f in &p.functions {
        out.push('\n');
        if let Some(m) = f.memo {
            let _ = writeln!(out, "@memo({}, {})", float_lit(m.tolerance), m.capacity);
        }
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{}: {}", p.name, p.ty))
            .collect();
        let _ = write!(out, "func {}({})", f.name, params.join(", "));
        if let Some(rt) = f.ret {
            let _ = write!(out, " -> {rt}");
        }
        out.push_str(" {\n");
        print_stmts(&mut out, &f.body, 1, p);
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn type_str(ty: &Type) -> String {
    let mut s = ty.scalar.to_string();
    for d in &ty.dims {
        let _ = write!(s, "[{d}]");
    }
    s
}

/// Float literal that survives re-lexing as a float (always has `.` or `e`).
pub fn float_lit(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains('E') {
        s
    } else {
        format!("{s}.0")
    }
}

fn print_stmts(out: &mut String, stmts: &[Stmt], level: usize, p: &Program) {
    for s in stmts {
        print_stmt(out, s, level, p);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize, p: &Program) {
    indent(out, level);
    match s {
        Stmt::Decl { name, ty, init, .. } => {
            let _ = write!(out, "var {}: {}", name, type_str(ty));
            if let Some(e) = init {
                let _ = write!(out, " = {}", expr_str(e, p));
            }
            out.push_str(";\n");
        }
        Stmt::Assign { target, value, .. } => {
            match target {
                LValue::Var { name, .. } => out.push_str(name),
                LValue::Index { name, indices, .. } => {
                    out.push_str(name);
                    for i in indices {
                        let _ = write!(out, "[{}]", expr_str(i, p));
                    }
                }
            }
            let _ = writeln!(out, " = {};", expr_str(value, p));
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
            ..
        } => {
            let _ = writeln!(out, "if ({}) {{", expr_str(cond, p));
            print_stmts(out, then_body, level + 1, p);
            indent(out, level);
            out.push('}');
            if !else_body.is_empty() {
                // `else if` chains print back in chained form
                if else_body.len() == 1 {
                    if let Stmt::If { .. } = &else_body[0] {
                        out.push_str(" else ");
                        let mut chained = String::new();
                        print_stmt(&mut chained, &else_body[0], level, p);
                        out.push_str(chained.trim_start());
                        return;
                    }
                }
                out.push_str(" else {\n");
                print_stmts(out, else_body, level + 1, p);
                indent(out, level);
                out.push('}');
            }
            out.push('\n');
        }
        Stmt::While { cond, body, .. } => {
            let _ = writeln!(out, "while ({}) {{", expr_str(cond, p));
            print_stmts(out, body, level + 1, p);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::For {
            var,
            init,
            bound,
            step,
            body,
            ..
        } => {
            let _ = writeln!(
                out,
                "for (var {var}: int = {}; {var} < {}; {var} = {var} + {}) {{",
                expr_str(init, p),
                expr_str(bound, p),
                for_step_str(step, p),
            );
            print_stmts(out, body, level + 1, p);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::Return { value, .. } => match value {
            Some(e) => {
                let _ = writeln!(out, "return {};", expr_str(e, p));
            }
            None => out.push_str("return;\n"),
        },
        Stmt::Call { name, args, .. } => {
            let _ = writeln!(out, "{name}({});", args_str(args, p));
        }
        Stmt::Emit {
            kind, args, word, ..
        } => match kind {
            EmitKind::Word => {
                let idx = word.expect("emit_word carries a string index");
                let text = &p.string_table[idx as usize];
                let _ = writeln!(out, "emit_word(\"{}\");", escape(text));
            }
            _ => {
                let _ = writeln!(out, "{}({});", kind.name(), args_str(args, p));
            }
        },
    }
}

fn escape(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}

fn args_str(args: &[Expr], p: &Program) -> String {
    let parts: Vec<String> = args.iter().map(|a| expr_str(a, p)).collect();
    parts.join(", ")
}

/// The for-step slot prints `i = i + STEP`; a step that is itself an additive
/// expression needs parens to re-parse into the same tree.
fn for_step_str(step: &Expr, p: &Program) -> String {
    if prec(step) <= PREC_ADD {
        format!("({})", expr_str(step, p))
    } else {
        expr_str(step, p)
    }
}

const PREC_CMP: u8 = 1;
const PREC_ADD: u8 = 2;
const PREC_MUL: u8 = 3;
const PREC_UNARY: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Compare { .. } => PREC_CMP,
        Expr::Binary { op, .. } => match op {
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div | BinOp::Mod => PREC_MUL,
        },
        Expr::Unary { .. } => PREC_UNARY,
        _ => PREC_ATOM,
    }
}

pub fn expr_str(e: &Expr, p: &Program) -> String {
    match e {
        Expr::IntLit { value, .. } => value.to_string(),
        Expr::FloatLit { value, .. } => float_lit(*value),
        Expr::Var { name, .. } => name.clone(),
        Expr::Index { name, indices, .. } => {
            let mut s = name.clone();
            for i in indices {
                let _ = write!(s, "[{}]", expr_str(i, p));
            }
            s
        }
        Expr::Unary { expr, .. } => {
            let inner = expr_str(expr, p);
            if prec(expr) < PREC_UNARY {
                format!("-({inner})")
            } else if matches!(expr.as_ref(), Expr::Unary { .. }) {
                format!("- {inner}")
            } else {
                format!("-{inner}")
            }
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let my = prec(e);
            let l = if prec(lhs) < my {
                format!("({})", expr_str(lhs, p))
            } else {
                expr_str(lhs, p)
            };
            let r = if prec(rhs) <= my {
                format!("({})", expr_str(rhs, p))
            } else {
                expr_str(rhs, p)
            };
            format!("{l} {} {r}", op.symbol())
        }
        Expr::Compare { op, lhs, rhs, .. } => {
            let l = if prec(lhs) <= PREC_CMP {
                format!("({})", expr_str(lhs, p))
            } else {
                expr_str(lhs, p)
            };
            let r = if prec(rhs) <= PREC_CMP {
                format!("({})", expr_str(rhs, p))
            } else {
                expr_str(rhs, p)
            };
            format!("{l} {} {r}", op.symbol())
        }
        Expr::Call { name, args, .. } => format!("{name}({})", args_str(args, p)),
        Expr::IntrinsicCall { kind, args, .. } => {
            format!("{}({})", kind.name(), args_str(args, p))
        }
    }
}
