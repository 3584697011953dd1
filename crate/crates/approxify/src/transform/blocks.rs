//! Enumeration of approximable blocks: loops and functions.
//!
//! Child numbering matches the interpreter's statement paths: an `if` orders
//! `cond, then.., else..`, a `for` orders `init, bound, step, body..`, a
//! `while` orders `cond, body..`.

use std::collections::HashSet;

use crate::lang::{Expr, FunctionDecl, LValue, NodePath, Program, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// `for` loop with a literal positive step and loop-invariant bound.
    CountedLoop,
    /// Any other loop; truncation does not apply.
    GeneralLoop,
    Function,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::CountedLoop => "counted-loop",
            BlockKind::GeneralLoop => "general-loop",
            BlockKind::Function => "function",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: u32,
    pub kind: BlockKind,
    pub function: String,
    /// Statement path of the loop; the root path for function blocks.
    pub path: NodePath,
    /// Functions only; always false for loops.
    pub memoizable: bool,
}

/// List every approximable block: each function except `main`, then each
/// loop, in declaration/preorder position.
pub fn enumerate_blocks(p: &Program) -> Vec<Block> {
    let memoizable = memoizable_functions(p);
    let mut blocks = Vec::new();
    for f in &p.functions {
        if f.name != "main" {
            blocks.push(Block {
                id: blocks.len() as u32,
                kind: BlockKind::Function,
                function: f.name.clone(),
                path: NodePath::root(),
                memoizable: memoizable.contains(&f.name),
            });
        }
        collect_loops(f, &f.body, &NodePath::root(), 0, &mut blocks);
    }
    blocks
}

fn collect_loops(
    f: &FunctionDecl,
    stmts: &[Stmt],
    base: &NodePath,
    offset: u32,
    out: &mut Vec<Block>,
) {
    for (i, s) in stmts.iter().enumerate() {
        let path = base.child(offset + i as u32);
        match s {
            Stmt::For { body, .. } => {
                let kind = if counted_step(f, s).is_some() {
                    BlockKind::CountedLoop
                } else {
                    BlockKind::GeneralLoop
                };
                out.push(Block {
                    id: out.len() as u32,
                    kind,
                    function: f.name.clone(),
                    path: path.clone(),
                    memoizable: false,
                });
                collect_loops(f, body, &path, 3, out);
            }
            Stmt::While { body, .. } => {
                out.push(Block {
                    id: out.len() as u32,
                    kind: BlockKind::GeneralLoop,
                    function: f.name.clone(),
                    path: path.clone(),
                    memoizable: false,
                });
                collect_loops(f, body, &path, 1, out);
            }
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                collect_loops(f, then_body, &path, 1, out);
                collect_loops(f, else_body, &path, 1 + then_body.len() as u32, out);
            }
            _ => {}
        }
    }
}

/// Literal positive step of a for-loop whose trip count is checkably affine:
/// the bound reads only values the body cannot change.
pub fn counted_step(f: &FunctionDecl, stmt: &Stmt) -> Option<i64> {
    let (var, bound, step, body) = match stmt {
        Stmt::For {
            var,
            bound,
            step,
            body,
            ..
        } => (var, bound, step, body),
        _ => return None,
    };
    let k = match step {
        Expr::IntLit { value, .. } if *value > 0 => *value,
        _ => return None,
    };
    let mut assigned = HashSet::new();
    let mut has_calls = false;
    assigned_names(body, &mut assigned, &mut has_calls);
    assigned.insert(var.clone());
    if bound_is_invariant(f, bound, &assigned, has_calls) {
        Some(k)
    } else {
        None
    }
}

fn assigned_names(stmts: &[Stmt], out: &mut HashSet<String>, has_calls: &mut bool) {
    for s in stmts {
        match s {
            Stmt::Decl { name, init, .. } => {
                out.insert(name.clone());
                if let Some(e) = init {
                    expr_has_calls(e, has_calls);
                }
            }
            Stmt::Assign { target, value, .. } => {
                out.insert(target.name().to_string());
                if let LValue::Index { indices, .. } = target {
                    for i in indices {
                        expr_has_calls(i, has_calls);
                    }
                }
                expr_has_calls(value, has_calls);
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                expr_has_calls(cond, has_calls);
                assigned_names(then_body, out, has_calls);
                assigned_names(else_body, out, has_calls);
            }
            Stmt::While { cond, body, .. } => {
                expr_has_calls(cond, has_calls);
                assigned_names(body, out, has_calls);
            }
            Stmt::For {
                var,
                init,
                bound,
                step,
                body,
                ..
            } => {
                out.insert(var.clone());
                expr_has_calls(init, has_calls);
                expr_has_calls(bound, has_calls);
                expr_has_calls(step, has_calls);
                assigned_names(body, out, has_calls);
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    expr_has_calls(e, has_calls);
                }
            }
            Stmt::Call { args, .. } => {
                *has_calls = true;
                for a in args {
                    expr_has_calls(a, has_calls);
                }
            }
            Stmt::Emit { args, .. } => {
                for a in args {
                    expr_has_calls(a, has_calls);
                }
            }
        }
    }
}

fn expr_has_calls(e: &Expr, has_calls: &mut bool) {
    match e {
        Expr::Call { args, .. } => {
            *has_calls = true;
            for a in args {
                expr_has_calls(a, has_calls);
            }
        }
        Expr::IntrinsicCall { args, .. } => {
            for a in args {
                expr_has_calls(a, has_calls);
            }
        }
        Expr::Binary { lhs, rhs, .. } | Expr::Compare { lhs, rhs, .. } => {
            expr_has_calls(lhs, has_calls);
            expr_has_calls(rhs, has_calls);
        }
        Expr::Unary { expr, .. } => expr_has_calls(expr, has_calls),
        Expr::Index { indices, .. } => {
            for i in indices {
                expr_has_calls(i, has_calls);
            }
        }
        _ => {}
    }
}

/// A bound is invariant when it is built from literals and plain arithmetic
/// over variables the body never assigns. Globals only count as stable when
/// the body makes no calls (calls may mutate them).
fn bound_is_invariant(
    f: &FunctionDecl,
    bound: &Expr,
    assigned: &HashSet<String>,
    body_has_calls: bool,
) -> bool {
    match bound {
        Expr::IntLit { .. } | Expr::FloatLit { .. } => true,
        Expr::Var { name, .. } => {
            if assigned.contains(name) {
                return false;
            }
            let is_local = f.params.iter().any(|p| &p.name == name) || declares_name(&f.body, name);
            is_local || !body_has_calls
        }
        Expr::Unary { expr, .. } => bound_is_invariant(f, expr, assigned, body_has_calls),
        Expr::Binary { lhs, rhs, .. } => {
            bound_is_invariant(f, lhs, assigned, body_has_calls)
                && bound_is_invariant(f, rhs, assigned, body_has_calls)
        }
        // calls, intrinsics, array reads and comparisons are not trip-count material
        _ => false,
    }
}

fn declares_name(stmts: &[Stmt], name: &str) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Decl { name: n, .. } => n == name,
        Stmt::For { var, body, .. } => var == name || declares_name(body, name),
        Stmt::If {
            then_body,
            else_body,
            ..
        } => declares_name(then_body, name) || declares_name(else_body, name),
        Stmt::While { body, .. } => declares_name(body, name),
        _ => false,
    })
}

/// A function is memoizable when it returns a number, touches no globals,
/// emits nothing, draws no randomness, and calls only memoizable functions.
pub fn is_memoizable(p: &Program, function: &str) -> bool {
    memoizable_functions(p).contains(function)
}

fn memoizable_functions(p: &Program) -> HashSet<String> {
    let globals: HashSet<&str> = p.globals.iter().map(|g| g.name.as_str()).collect();
    // candidates by local properties
    let mut candidates: HashSet<String> = p
        .functions
        .iter()
        .filter(|f| f.name != "main" && f.ret.is_some() && is_pure_body(&f.body, &globals))
        .map(|f| f.name.clone())
        .collect();
    // drop functions that call outside the candidate set, to fixpoint
    loop {
        let mut removed = false;
        for f in &p.functions {
            if !candidates.contains(&f.name) {
                continue;
            }
            let mut callees = HashSet::new();
            collect_callees(&f.body, &mut callees);
            if callees.iter().any(|c| !candidates.contains(c)) {
                candidates.remove(&f.name);
                removed = true;
            }
        }
        if !removed {
            return candidates;
        }
    }
}

fn is_pure_body(stmts: &[Stmt], globals: &HashSet<&str>) -> bool {
    stmts.iter().all(|s| match s {
        Stmt::Emit { .. } => false,
        Stmt::Decl { init, .. } => init.as_ref().is_none_or(|e| pure_expr(e, globals)),
        Stmt::Assign { target, value, .. } => {
            !globals.contains(target.name())
                && match target {
                    LValue::Index { indices, .. } => indices.iter().all(|i| pure_expr(i, globals)),
                    LValue::Var { .. } => true,
                }
                && pure_expr(value, globals)
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
            ..
        } => {
            pure_expr(cond, globals)
                && is_pure_body(then_body, globals)
                && is_pure_body(else_body, globals)
        }
        Stmt::While { cond, body, .. } => pure_expr(cond, globals) && is_pure_body(body, globals),
        Stmt::For {
            init,
            bound,
            step,
            body,
            ..
        } => {
            pure_expr(init, globals)
                && pure_expr(bound, globals)
                && pure_expr(step, globals)
                && is_pure_body(body, globals)
        }
        Stmt::Return { value, .. } => value.as_ref().is_none_or(|e| pure_expr(e, globals)),
        Stmt::Call { args, .. } => args.iter().all(|a| pure_expr(a, globals)),
    })
}

fn pure_expr(e: &Expr, globals: &HashSet<&str>) -> bool {
    match e {
        Expr::IntLit { .. } | Expr::FloatLit { .. } => true,
        Expr::Var { name, .. } => !globals.contains(name.as_str()),
        Expr::Index { name, indices, .. } => {
            !globals.contains(name.as_str()) && indices.iter().all(|i| pure_expr(i, globals))
        }
        Expr::Unary { expr, .. } => pure_expr(expr, globals),
        Expr::Binary { lhs, rhs, .. } | Expr::Compare { lhs, rhs, .. } => {
            pure_expr(lhs, globals) && pure_expr(rhs, globals)
        }
        Expr::Call { args, .. } => args.iter().all(|a| pure_expr(a, globals)),
        Expr::IntrinsicCall { kind, args, .. } => {
            !matches!(kind, crate::lang::Intrinsic::Rand)
                && args.iter().all(|a| pure_expr(a, globals))
        }
    }
}

fn collect_callees(stmts: &[Stmt], out: &mut HashSet<String>) {
    fn from_expr(e: &Expr, out: &mut HashSet<String>) {
        match e {
            Expr::Call { name, args, .. } => {
                out.insert(name.clone());
                for a in args {
                    from_expr(a, out);
                }
            }
            Expr::IntrinsicCall { args, .. } => {
                for a in args {
                    from_expr(a, out);
                }
            }
            Expr::Binary { lhs, rhs, .. } | Expr::Compare { lhs, rhs, .. } => {
                from_expr(lhs, out);
                from_expr(rhs, out);
            }
            Expr::Unary { expr, .. } => from_expr(expr, out),
            Expr::Index { indices, .. } => {
                for i in indices {
                    from_expr(i, out);
                }
            }
            _ => {}
        }
    }
    for s in stmts {
        match s {
            Stmt::Decl { init, .. } => {
                if let Some(e) = init {
                    from_expr(e, out);
                }
            }
            Stmt::Assign { target, value, .. } => {
                if let LValue::Index { indices, .. } = target {
                    for i in indices {
                        from_expr(i, out);
                    }
                }
                from_expr(value, out);
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                from_expr(cond, out);
                collect_callees(then_body, out);
                collect_callees(else_body, out);
            }
            Stmt::While { cond, body, .. } => {
                from_expr(cond, out);
                collect_callees(body, out);
            }
            Stmt::For {
                init,
                bound,
                step,
                body,
                ..
            } => {
                from_expr(init, out);
                from_expr(bound, out);
                from_expr(step, out);
                collect_callees(body, out);
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    from_expr(e, out);
                }
            }
            Stmt::Call { name, args, .. } => {
                out.insert(name.clone());
                for a in args {
                    from_expr(a, out);
                }
            }
            Stmt::Emit { args, .. } => {
                for a in args {
                    from_expr(a, out);
                }
            }
        }
    }
}
