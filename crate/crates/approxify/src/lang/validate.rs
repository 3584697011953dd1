//! Semantic checks: name resolution, typing, output-channel agreement.
//!
//! ApproxC scoping is deliberately strict: every variable name is unique
//! within its function (no shadowing of parameters, globals, or other
//! locals), which keeps resolution and rewriting trivial.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::LangError;

pub fn validate(p: &Program) -> Result<(), LangError> {
    let mut ctx = Ctx::new(p)?;
    for f in &p.functions {
        ctx.check_function(f)?;
    }
    match p.function("main") {
        None => Err(LangError::Semantic {
            line: 0,
            col: 0,
            message: "program has no `main` function".to_string(),
        }),
        Some(main) => {
            if !main.params.is_empty() {
                return Err(sem(main.span, "`main` takes no parameters"));
            }
            if main.ret.is_some() {
                return Err(sem(main.span, "`main` must not declare a return type"));
            }
            Ok(())
        }
    }
}

fn sem(span: Span, msg: impl Into<String>) -> LangError {
    LangError::Semantic {
        line: span.line,
        col: span.col,
        message: msg.into(),
    }
}

struct FnSig {
    params: Vec<ScalarType>,
    ret: Option<ScalarType>,
}

struct Ctx<'a> {
    program: &'a Program,
    globals: HashMap<String, Type>,
    functions: HashMap<String, FnSig>,
}

impl<'a> Ctx<'a> {
    fn new(p: &'a Program) -> Result<Self, LangError> {
        let mut globals = HashMap::new();
        for g in &p.globals {
            if Intrinsic::from_name(&g.name).is_some() || EmitKind::from_name(&g.name).is_some() {
                return Err(sem(
                    g.span,
                    format!("`{}` is a reserved builtin name", g.name),
                ));
            }
            if globals.insert(g.name.clone(), g.ty.clone()).is_some() {
                return Err(sem(g.span, format!("duplicate global `{}`", g.name)));
            }
            if let Some(init) = &g.init {
                if !g.ty.is_scalar() {
                    return Err(sem(g.span, "array globals cannot have initializers"));
                }
                let ok = match (g.ty.scalar, init) {
                    (ScalarType::Int, Expr::IntLit { .. }) => true,
                    (ScalarType::Float, Expr::FloatLit { .. }) => true,
                    (ScalarType::Float, Expr::IntLit { .. }) => true,
                    (_, Expr::Unary { expr, .. }) => matches!(
                        (g.ty.scalar, expr.as_ref()),
                        (ScalarType::Int, Expr::IntLit { .. })
                            | (ScalarType::Float, Expr::FloatLit { .. })
                            | (ScalarType::Float, Expr::IntLit { .. })
                    ),
                    _ => false,
                };
                if !ok {
                    return Err(sem(
                        init.span(),
                        "global initializers must be literal constants",
                    ));
                }
            }
        }

        let mut functions = HashMap::new();
        for f in &p.functions {
            if Intrinsic::from_name(&f.name).is_some() || EmitKind::from_name(&f.name).is_some() {
                return Err(sem(
                    f.span,
                    format!("`{}` is a reserved builtin name", f.name),
                ));
            }
            if globals.contains_key(&f.name) {
                return Err(sem(
                    f.span,
                    format!("`{}` is already a global name", f.name),
                ));
            }
            let sig = FnSig {
                params: f.params.iter().map(|p| p.ty).collect(),
                ret: f.ret,
            };
            if functions.insert(f.name.clone(), sig).is_some() {
                return Err(sem(f.span, format!("duplicate function `{}`", f.name)));
            }
            if let Some(m) = f.memo {
                if m.tolerance < 0.0 || !m.tolerance.is_finite() {
                    return Err(sem(f.span, "memo tolerance must be finite and >= 0"));
                }
                if m.capacity == 0 {
                    return Err(sem(f.span, "memo capacity must be >= 1"));
                }
            }
        }
        Ok(Ctx {
            program: p,
            globals,
            functions,
        })
    }

    fn check_function(&mut self, f: &FunctionDecl) -> Result<(), LangError> {
        // Function-wide uniqueness: params, locals, loop vars, globals.
        let mut names: HashMap<String, Span> = HashMap::new();
        for p in &f.params {
            if self.globals.contains_key(&p.name) {
                return Err(sem(
                    p.span,
                    format!("parameter `{}` shadows a global", p.name),
                ));
            }
            if names.insert(p.name.clone(), p.span).is_some() {
                return Err(sem(p.span, format!("duplicate parameter `{}`", p.name)));
            }
        }
        collect_decl_names(&f.body, &self.globals, &mut names)?;

        let mut scope = Scope::new(self, f);
        scope.check_stmts(&f.body)?;
        Ok(())
    }
}

fn collect_decl_names(
    stmts: &[Stmt],
    globals: &HashMap<String, Type>,
    names: &mut HashMap<String, Span>,
) -> Result<(), LangError> {
    for s in stmts {
        match s {
            Stmt::Decl { name, span, .. } => {
                if globals.contains_key(name) {
                    return Err(sem(*span, format!("local `{name}` shadows a global")));
                }
                if names.insert(name.clone(), *span).is_some() {
                    return Err(sem(
                        *span,
                        format!("`{name}` is declared more than once in this function"),
                    ));
                }
            }
            Stmt::For {
                var, body, span, ..
            } => {
                if globals.contains_key(var) {
                    return Err(sem(
                        *span,
                        format!("loop variable `{var}` shadows a global"),
                    ));
                }
                if names.insert(var.clone(), *span).is_some() {
                    return Err(sem(
                        *span,
                        format!("`{var}` is declared more than once in this function"),
                    ));
                }
                collect_decl_names(body, globals, names)?;
            }
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                collect_decl_names(then_body, globals, names)?;
                collect_decl_names(else_body, globals, names)?;
            }
            Stmt::While { body, .. } => collect_decl_names(body, globals, names)?,
            _ => {}
        }
    }
    Ok(())
}

struct Scope<'a, 'b> {
    ctx: &'b Ctx<'a>,
    func: &'b FunctionDecl,
    /// Visible variables, innermost block last.
    blocks: Vec<HashSet<String>>,
    vars: HashMap<String, Type>,
    /// Induction variables of enclosing for-loops; assignment to them is rejected.
    loop_vars: Vec<String>,
}

impl<'a, 'b> Scope<'a, 'b> {
    fn new(ctx: &'b Ctx<'a>, func: &'b FunctionDecl) -> Self {
        let mut vars = HashMap::new();
        let mut top = HashSet::new();
        for p in &func.params {
            vars.insert(p.name.clone(), Type::scalar(p.ty));
            top.insert(p.name.clone());
        }
        Scope {
            ctx,
            func,
            blocks: vec![top],
            vars,
            loop_vars: Vec::new(),
        }
    }

    fn declare(&mut self, name: &str, ty: Type) {
        self.vars.insert(name.to_string(), ty);
        self.blocks.last_mut().unwrap().insert(name.to_string());
    }

    fn lookup(&self, name: &str) -> Option<&Type> {
        if self.blocks.iter().any(|b| b.contains(name)) {
            return self.vars.get(name);
        }
        self.ctx.globals.get(name)
    }

    fn enter(&mut self) {
        self.blocks.push(HashSet::new());
    }

    fn exit(&mut self) {
        let gone = self.blocks.pop().unwrap();
        for name in gone {
            self.vars.remove(&name);
        }
    }

    fn check_stmts(&mut self, stmts: &[Stmt]) -> Result<(), LangError> {
        for s in stmts {
            self.check_stmt(s)?;
        }
        Ok(())
    }

    fn check_stmt(&mut self, s: &Stmt) -> Result<(), LangError> {
        match s {
            Stmt::Decl {
                name,
                ty,
                init,
                span,
            } => {
                if let Some(e) = init {
                    if !ty.is_scalar() {
                        return Err(sem(*span, "array declarations cannot have initializers"));
                    }
                    let et = self.expr_type(e)?;
                    self.check_assignable(ty.scalar, et, e.span())?;
                }
                self.declare(name, ty.clone());
                Ok(())
            }
            Stmt::Assign {
                target,
                value,
                span,
            } => {
                let name = target.name();
                if self.loop_vars.iter().any(|v| v == name) {
                    return Err(sem(
                        *span,
                        format!("loop variable `{name}` cannot be assigned in the loop body"),
                    ));
                }
                let ty = self
                    .lookup(name)
                    .cloned()
                    .ok_or_else(|| sem(target.span(), format!("undeclared variable `{name}`")))?;
                let target_scalar = match target {
                    LValue::Var { .. } => {
                        if !ty.is_scalar() {
                            return Err(sem(
                                target.span(),
                                format!("array `{name}` must be assigned element-wise"),
                            ));
                        }
                        ty.scalar
                    }
                    LValue::Index { indices, .. } => {
                        self.check_index(name, &ty, indices, target.span())?
                    }
                };
                let vt = self.expr_type(value)?;
                self.check_assignable(target_scalar, vt, value.span())
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                self.check_cond(cond)?;
                self.enter();
                self.check_stmts(then_body)?;
                self.exit();
                self.enter();
                self.check_stmts(else_body)?;
                self.exit();
                Ok(())
            }
            Stmt::While { cond, body, .. } => {
                self.check_cond(cond)?;
                self.enter();
                self.check_stmts(body)?;
                self.exit();
                Ok(())
            }
            Stmt::For {
                var,
                init,
                bound,
                step,
                body,
                span,
            } => {
                for (what, e) in [("init", init), ("bound", bound), ("step", step)] {
                    let t = self.expr_type(e)?;
                    if t != ScalarType::Int {
                        return Err(sem(
                            e.span(),
                            format!("for-loop {what} must be int, found {t}"),
                        ));
                    }
                }
                let _ = span;
                self.enter();
                self.declare(var, Type::scalar(ScalarType::Int));
                self.loop_vars.push(var.clone());
                self.check_stmts(body)?;
                self.loop_vars.pop();
                self.exit();
                Ok(())
            }
            Stmt::Return { value, span } => match (self.func.ret, value) {
                (None, None) => Ok(()),
                (None, Some(e)) => Err(sem(e.span(), "void function returns a value")),
                (Some(_), None) => Err(sem(*span, "missing return value")),
                (Some(rt), Some(e)) => {
                    let et = self.expr_type(e)?;
                    self.check_assignable(rt, et, e.span())
                }
            },
            Stmt::Call { name, args, span } => {
                let ret = self.check_call(name, args, *span)?;
                if ret.is_some() {
                    return Err(sem(
                        *span,
                        format!("result of `{name}` must be used (assign it to a variable)"),
                    ));
                }
                Ok(())
            }
            Stmt::Emit {
                kind,
                args,
                word,
                span,
            } => {
                match kind {
                    EmitKind::Num => {
                        if !matches!(self.ctx.program.output_decl, OutputKind::Numeric) {
                            return Err(sem(
                                *span,
                                "emit_num requires `output numeric` (the default)",
                            ));
                        }
                        if args.len() != 1 {
                            return Err(sem(*span, "emit_num takes one argument"));
                        }
                        self.expr_type(&args[0])?;
                    }
                    EmitKind::Pixel => {
                        if !matches!(self.ctx.program.output_decl, OutputKind::Image { .. }) {
                            return Err(sem(*span, "emit_pixel requires `output image(R, C)`"));
                        }
                        if args.len() != 3 {
                            return Err(sem(*span, "emit_pixel takes (row, col, value)"));
                        }
                        for idx in &args[0..2] {
                            if self.expr_type(idx)? != ScalarType::Int {
                                return Err(sem(idx.span(), "pixel coordinates must be int"));
                            }
                        }
                        self.expr_type(&args[2])?;
                    }
                    EmitKind::Word => {
                        if !matches!(self.ctx.program.output_decl, OutputKind::Text) {
                            return Err(sem(*span, "emit_word requires `output text`"));
                        }
                        if word.is_none() {
                            return Err(sem(*span, "emit_word takes a string literal"));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn check_cond(&mut self, cond: &Expr) -> Result<(), LangError> {
        let t = self.expr_type(cond)?;
        if t != ScalarType::Int {
            return Err(sem(cond.span(), "condition must be int (0 is false)"));
        }
        Ok(())
    }

    fn check_assignable(
        &self,
        target: ScalarType,
        value: ScalarType,
        span: Span,
    ) -> Result<(), LangError> {
        match (target, value) {
            (ScalarType::Int, ScalarType::Float) => Err(sem(
                span,
                "cannot assign float to int (no implicit narrowing)",
            )),
            _ => Ok(()),
        }
    }

    fn check_index(
        &mut self,
        name: &str,
        ty: &Type,
        indices: &[Expr],
        span: Span,
    ) -> Result<ScalarType, LangError> {
        if ty.is_scalar() {
            return Err(sem(span, format!("`{name}` is not an array")));
        }
        if indices.len() != ty.dims.len() {
            return Err(sem(
                span,
                format!(
                    "`{name}` has {} dimension(s), {} index(es) given",
                    ty.dims.len(),
                    indices.len()
                ),
            ));
        }
        for idx in indices {
            if self.expr_type(idx)? != ScalarType::Int {
                return Err(sem(idx.span(), "array indices must be int"));
            }
        }
        Ok(ty.scalar)
    }

    fn check_call(
        &mut self,
        name: &str,
        args: &[Expr],
        span: Span,
    ) -> Result<Option<ScalarType>, LangError> {
        let sig = self
            .ctx
            .functions
            .get(name)
            .ok_or_else(|| sem(span, format!("call to undeclared function `{name}`")))?;
        if sig.params.len() != args.len() {
            return Err(sem(
                span,
                format!(
                    "`{name}` takes {} argument(s), {} given",
                    sig.params.len(),
                    args.len()
                ),
            ));
        }
        let params = sig.params.clone();
        let ret = sig.ret;
        for (arg, want) in args.iter().zip(params) {
            let got = self.expr_type(arg)?;
            self.check_assignable(want, got, arg.span())?;
        }
        Ok(ret)
    }

    fn expr_type(&mut self, e: &Expr) -> Result<ScalarType, LangError> {
        match e {
            Expr::IntLit { .. } => Ok(ScalarType::Int),
            Expr::FloatLit { .. } => Ok(ScalarType::Float),
            Expr::Var { name, span } => {
                let ty = self
                    .lookup(name)
                    .ok_or_else(|| sem(*span, format!("undeclared variable `{name}`")))?;
                if !ty.is_scalar() {
                    return Err(sem(*span, format!("array `{name}` must be indexed")));
                }
                Ok(ty.scalar)
            }
            Expr::Index {
                name,
                indices,
                span,
            } => {
                let ty = self
                    .lookup(name)
                    .cloned()
                    .ok_or_else(|| sem(*span, format!("undeclared variable `{name}`")))?;
                self.check_index(name, &ty, indices, *span)
            }
            Expr::Unary { expr, .. } => self.expr_type(expr),
            Expr::Binary { op, lhs, rhs, span } => {
                let lt = self.expr_type(lhs)?;
                let rt = self.expr_type(rhs)?;
                match (lt, rt) {
                    (ScalarType::Int, ScalarType::Int) => Ok(ScalarType::Int),
                    _ if *op == BinOp::Mod => Err(sem(*span, "`%` requires int operands")),
                    _ => Ok(ScalarType::Float),
                }
            }
            Expr::Compare { lhs, rhs, .. } => {
                self.expr_type(lhs)?;
                self.expr_type(rhs)?;
                Ok(ScalarType::Int)
            }
            Expr::Call { name, args, span } => match self.check_call(name, args, *span)? {
                Some(t) => Ok(t),
                None => Err(sem(
                    *span,
                    format!("void function `{name}` used as a value"),
                )),
            },
            Expr::IntrinsicCall { kind, args, span } => {
                if args.len() != kind.arity() {
                    return Err(sem(
                        *span,
                        format!(
                            "`{}` takes {} argument(s), {} given",
                            kind.name(),
                            kind.arity(),
                            args.len()
                        ),
                    ));
                }
                let mut arg_types = Vec::new();
                for a in args {
                    arg_types.push(self.expr_type(a)?);
                }
                match kind {
                    Intrinsic::Abs => Ok(arg_types[0]),
                    Intrinsic::Min | Intrinsic::Max => {
                        if arg_types[0] == ScalarType::Int && arg_types[1] == ScalarType::Int {
                            Ok(ScalarType::Int)
                        } else {
                            Ok(ScalarType::Float)
                        }
                    }
                    Intrinsic::Exp | Intrinsic::Sqrt | Intrinsic::Rand => Ok(ScalarType::Float),
                    Intrinsic::InNum => {
                        if arg_types[0] != ScalarType::Int {
                            return Err(sem(args[0].span(), "in_num index must be int"));
                        }
                        Ok(ScalarType::Float)
                    }
                    Intrinsic::InPixel => {
                        for a in args {
                            if self.expr_type(a)? != ScalarType::Int {
                                return Err(sem(a.span(), "in_pixel coordinates must be int"));
                            }
                        }
                        Ok(ScalarType::Float)
                    }
                    Intrinsic::InLen => Ok(ScalarType::Int),
                }
            }
        }
    }
}
