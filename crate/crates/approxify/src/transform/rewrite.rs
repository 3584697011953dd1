//! The four approximation rewrites, as whole-program source transforms.
//!
//! Perforation is expressed with ordinary language constructs so the
//! rewritten program is first-class ApproxC: truncation rewrites the loop
//! bound through hoisted trip-count arithmetic, sampling guards the body on a
//! fresh iteration counter, random perforation guards on `rand()`.
//! Memoization marks the function with a `@memo(tol, cap)` attribute that the
//! interpreter implements as a bounded LRU cache with per-argument absolute
//! tolerance.
//!
//! Identity parameters (truncation 0, sampling 1, random 0) return the
//! program unchanged.

use std::collections::{HashMap, HashSet};

use crate::lang::{
    revalidate, BinOp, CmpOp, Expr, FunctionDecl, Intrinsic, LValue, MemoAttr, NodePath, Program,
    ScalarType, Span, Stmt, Type,
};

use super::blocks::{counted_step, Block, BlockKind};
use super::TransformError;

/// One approximation technique with its intensity parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApproxTechnique {
    /// Skip the trailing `factor` fraction of a counted loop's iterations.
    Truncation { factor: f64 },
    /// Execute every `factor`-th iteration.
    Sampling { factor: u32 },
    /// Skip each iteration with probability `threshold`.
    Random { threshold: f64, seed: u64 },
    /// Tolerance-based function cache.
    Memoization { tolerance: f64, capacity: u32 },
}

impl ApproxTechnique {
    pub fn check(&self) -> Result<(), TransformError> {
        let ok = match self {
            ApproxTechnique::Truncation { factor } => (0.0..1.0).contains(factor),
            ApproxTechnique::Sampling { factor } => *factor >= 1,
            ApproxTechnique::Random { threshold, .. } => (0.0..1.0).contains(threshold),
            ApproxTechnique::Memoization {
                tolerance,
                capacity,
            } => *tolerance >= 0.0 && tolerance.is_finite() && *capacity >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(TransformError::InvalidParameter(format!("{self:?}")))
        }
    }

    /// Truncation 0, sampling 1 and random 0 leave the program untouched.
    pub fn is_identity(&self) -> bool {
        match self {
            ApproxTechnique::Truncation { factor } => *factor == 0.0,
            ApproxTechnique::Sampling { factor } => *factor == 1,
            ApproxTechnique::Random { threshold, .. } => *threshold == 0.0,
            ApproxTechnique::Memoization { .. } => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ApproxTechnique::Truncation { .. } => "truncation",
            ApproxTechnique::Sampling { .. } => "sampling",
            ApproxTechnique::Random { .. } => "random",
            ApproxTechnique::Memoization { .. } => "memoization",
        }
    }

    pub fn intensity(&self) -> f64 {
        match self {
            ApproxTechnique::Truncation { factor } => *factor,
            ApproxTechnique::Sampling { factor } => *factor as f64,
            ApproxTechnique::Random { threshold, .. } => *threshold,
            ApproxTechnique::Memoization { tolerance, .. } => *tolerance,
        }
    }
}

/// One point in the approximation search space: a loop technique and a
/// memoization setting, applied uniformly to every safe block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxConfig {
    pub loop_technique: ApproxTechnique,
    pub memo_technique: ApproxTechnique,
    pub seed: u64,
}

impl ApproxConfig {
    pub fn check(&self) -> Result<(), TransformError> {
        self.loop_technique.check()?;
        self.memo_technique.check()?;
        if matches!(self.loop_technique, ApproxTechnique::Memoization { .. }) {
            return Err(TransformError::InvalidParameter(
                "loop technique must be a perforation variant".to_string(),
            ));
        }
        if !matches!(self.memo_technique, ApproxTechnique::Memoization { .. }) {
            return Err(TransformError::InvalidParameter(
                "memo technique must be memoization".to_string(),
            ));
        }
        Ok(())
    }
}

pub fn apply_truncation(
    p: &Program,
    block: &Block,
    factor: f64,
) -> Result<Program, TransformError> {
    ApproxTechnique::Truncation { factor }.check()?;
    if factor == 0.0 {
        return Ok(p.clone());
    }
    apply_loop_rewrites(p, &[(block, LoopRewrite::Truncation { factor })])
}

pub fn apply_sampling(p: &Program, block: &Block, factor: u32) -> Result<Program, TransformError> {
    ApproxTechnique::Sampling { factor }.check()?;
    if factor == 1 {
        return Ok(p.clone());
    }
    apply_loop_rewrites(p, &[(block, LoopRewrite::Sampling { factor })])
}

pub fn apply_random(
    p: &Program,
    block: &Block,
    threshold: f64,
    seed: u64,
) -> Result<Program, TransformError> {
    ApproxTechnique::Random { threshold, seed }.check()?;
    if threshold == 0.0 {
        return Ok(p.clone());
    }
    apply_loop_rewrites(p, &[(block, LoopRewrite::Random { threshold })])
}

pub fn apply_memoization(
    p: &Program,
    block: &Block,
    tolerance: f64,
    capacity: u32,
) -> Result<Program, TransformError> {
    ApproxTechnique::Memoization {
        tolerance,
        capacity,
    }
    .check()?;
    if block.kind != BlockKind::Function {
        return Err(TransformError::NotAFunction { block: block.id });
    }
    if !block.memoizable {
        return Err(TransformError::NotMemoizable { block: block.id });
    }
    let mut out = p.clone();
    let f = out
        .functions
        .iter_mut()
        .find(|f| f.name == block.function)
        .ok_or(TransformError::UnknownBlock { id: block.id })?;
    f.memo = Some(MemoAttr {
        tolerance,
        capacity,
    });
    revalidate(&out).expect("memo attribute kept the program valid");
    Ok(out)
}

/// Apply one technique from a block descriptor, dispatching on kind.
pub fn apply_technique(
    p: &Program,
    block: &Block,
    technique: &ApproxTechnique,
) -> Result<Program, TransformError> {
    match technique {
        ApproxTechnique::Truncation { factor } => apply_truncation(p, block, *factor),
        ApproxTechnique::Sampling { factor } => apply_sampling(p, block, *factor),
        ApproxTechnique::Random { threshold, seed } => apply_random(p, block, *threshold, *seed),
        ApproxTechnique::Memoization {
            tolerance,
            capacity,
        } => apply_memoization(p, block, *tolerance, *capacity),
    }
}

/// Uniform sweep application: the loop technique goes on every safe loop
/// (truncation silently skips general loops), the memoization setting on
/// every safe function.
pub fn apply_config(
    p: &Program,
    safe_loops: &[&Block],
    safe_functions: &[&Block],
    config: &ApproxConfig,
) -> Result<Program, TransformError> {
    config.check()?;
    let mut rewrites = Vec::new();
    if !config.loop_technique.is_identity() {
        for b in safe_loops {
            let rw = match config.loop_technique {
                ApproxTechnique::Truncation { factor } => {
                    if b.kind != BlockKind::CountedLoop {
                        continue;
                    }
                    LoopRewrite::Truncation { factor }
                }
                ApproxTechnique::Sampling { factor } => LoopRewrite::Sampling { factor },
                ApproxTechnique::Random { threshold, .. } => LoopRewrite::Random { threshold },
                ApproxTechnique::Memoization { .. } => unreachable!("checked above"),
            };
            rewrites.push((*b, rw));
        }
    }
    let mut out = if rewrites.is_empty() {
        p.clone()
    } else {
        apply_loop_rewrites(p, &rewrites)?
    };
    if let ApproxTechnique::Memoization {
        tolerance,
        capacity,
    } = config.memo_technique
    {
        for b in safe_functions {
            if b.kind != BlockKind::Function || !b.memoizable {
                continue;
            }
            if let Some(f) = out.functions.iter_mut().find(|f| f.name == b.function) {
                f.memo = Some(MemoAttr {
                    tolerance,
                    capacity,
                });
            }
        }
        revalidate(&out).expect("memo attributes kept the program valid");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum LoopRewrite {
    Truncation { factor: f64 },
    Sampling { factor: u32 },
    Random { threshold: f64 },
}

fn apply_loop_rewrites(
    p: &Program,
    targets: &[(&Block, LoopRewrite)],
) -> Result<Program, TransformError> {
    // group targets per function, keyed by loop path
    let mut by_fn: HashMap<&str, HashMap<&NodePath, LoopRewrite>> = HashMap::new();
    for (b, rw) in targets {
        if b.kind == BlockKind::Function {
            return Err(TransformError::NotALoop { block: b.id });
        }
        by_fn
            .entry(b.function.as_str())
            .or_default()
            .insert(&b.path, *rw);
    }

    for (b, _) in targets {
        if p.function(&b.function).is_none() {
            return Err(TransformError::UnknownBlock { id: b.id });
        }
    }

    let mut out = p.clone();
    for f in &mut out.functions {
        let Some(fn_targets) = by_fn.get(f.name.as_str()) else {
            continue;
        };
        // verify all paths exist and truncation targets are counted
        for (b, rw) in targets {
            if b.function != f.name {
                continue;
            }
            let stmt =
                find_stmt(&f.body, &b.path).ok_or(TransformError::UnknownBlock { id: b.id })?;
            if !stmt.is_loop() {
                return Err(TransformError::NotALoop { block: b.id });
            }
            if matches!(rw, LoopRewrite::Truncation { .. }) && counted_step(f, stmt).is_none() {
                return Err(TransformError::NotCounted { block: b.id });
            }
        }
        let mut names = Namer::for_function(p, f);
        let steps: HashMap<NodePath, i64> = collect_counted_steps(f, fn_targets);
        f.body = rewrite_stmts(
            std::mem::take(&mut f.body),
            &NodePath::root(),
            0,
            fn_targets,
            &steps,
            &mut names,
        );
    }
    revalidate(&out).expect("perforation rewrite kept the program valid");
    Ok(out)
}

fn collect_counted_steps(
    f: &FunctionDecl,
    targets: &HashMap<&NodePath, LoopRewrite>,
) -> HashMap<NodePath, i64> {
    let mut out = HashMap::new();
    for (path, rw) in targets {
        if matches!(rw, LoopRewrite::Truncation { .. }) {
            if let Some(stmt) = find_stmt(&f.body, path) {
                if let Some(k) = counted_step(f, stmt) {
                    out.insert((*path).clone(), k);
                }
            }
        }
    }
    out
}

fn find_stmt<'a>(body: &'a [Stmt], path: &NodePath) -> Option<&'a Stmt> {
    fn descend<'a>(stmts: &'a [Stmt], base_offset: u32, rest: &[u32]) -> Option<&'a Stmt> {
        let idx = (*rest.first()?).checked_sub(base_offset)? as usize;
        let stmt = stmts.get(idx)?;
        let rest = &rest[1..];
        if rest.is_empty() {
            return Some(stmt);
        }
        match stmt {
            Stmt::For { body, .. } => descend(body, 3, rest),
            Stmt::While { body, .. } => descend(body, 1, rest),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                let child = *rest.first()? as usize;
                if child > then_body.len() {
                    descend(else_body, 1 + then_body.len() as u32, rest)
                } else {
                    descend(then_body, 1, rest)
                }
            }
            _ => None,
        }
    }
    descend(body, 0, &path.0)
}

/// Fresh-name generator scoped to one function (and the globals).
struct Namer {
    used: HashSet<String>,
}

impl Namer {
    fn for_function(p: &Program, f: &FunctionDecl) -> Self {
        let mut used: HashSet<String> = p.globals.iter().map(|g| g.name.clone()).collect();
        for func in &p.functions {
            used.insert(func.name.clone());
        }
        for param in &f.params {
            used.insert(param.name.clone());
        }
        collect_names(&f.body, &mut used);
        Namer { used }
    }

    fn fresh(&mut self, base: &str) -> String {
        if self.used.insert(base.to_string()) {
            return base.to_string();
        }
        let mut n = 1u32;
        loop {
            let candidate = format!("{base}_{n}");
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
            n += 1;
        }
    }
}

fn collect_names(stmts: &[Stmt], out: &mut HashSet<String>) {
    for s in stmts {
        match s {
            Stmt::Decl { name, .. } => {
                out.insert(name.clone());
            }
            Stmt::For { var, body, .. } => {
                out.insert(var.clone());
                collect_names(body, out);
            }
            Stmt::While { body, .. } => collect_names(body, out),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                collect_names(then_body, out);
                collect_names(else_body, out);
            }
            _ => {}
        }
    }
}

fn rewrite_stmts(
    stmts: Vec<Stmt>,
    base: &NodePath,
    offset: u32,
    targets: &HashMap<&NodePath, LoopRewrite>,
    steps: &HashMap<NodePath, i64>,
    names: &mut Namer,
) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(stmts.len());
    for (i, s) in stmts.into_iter().enumerate() {
        let path = base.child(offset + i as u32);
        out.extend(rewrite_stmt(s, &path, targets, steps, names));
    }
    out
}

fn rewrite_stmt(
    s: Stmt,
    path: &NodePath,
    targets: &HashMap<&NodePath, LoopRewrite>,
    steps: &HashMap<NodePath, i64>,
    names: &mut Namer,
) -> Vec<Stmt> {
    match s {
        Stmt::For {
            var,
            init,
            bound,
            step,
            body,
            span,
        } => {
            let body = rewrite_stmts(body, path, 3, targets, steps, names);
            let loop_stmt = Stmt::For {
                var,
                init,
                bound,
                step,
                body,
                span,
            };
            match targets.get(path) {
                Some(rw) => expand_rewrite(loop_stmt, *rw, steps.get(path).copied(), names),
                None => vec![loop_stmt],
            }
        }
        Stmt::While { cond, body, span } => {
            let body = rewrite_stmts(body, path, 1, targets, steps, names);
            let loop_stmt = Stmt::While { cond, body, span };
            match targets.get(path) {
                Some(rw) => expand_rewrite(loop_stmt, *rw, None, names),
                None => vec![loop_stmt],
            }
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
            span,
        } => {
            let then_offset = then_body.len() as u32;
            let then_body = rewrite_stmts(then_body, path, 1, targets, steps, names);
            let else_body = rewrite_stmts(else_body, path, 1 + then_offset, targets, steps, names);
            vec![Stmt::If {
                cond,
                then_body,
                else_body,
                span,
            }]
        }
        other => vec![other],
    }
}

fn expand_rewrite(
    loop_stmt: Stmt,
    rw: LoopRewrite,
    counted: Option<i64>,
    names: &mut Namer,
) -> Vec<Stmt> {
    match rw {
        LoopRewrite::Truncation { factor } => {
            truncate_counted(loop_stmt, factor, counted.expect("verified counted"), names)
        }
        LoopRewrite::Sampling { factor } => sample_loop(loop_stmt, factor, names),
        LoopRewrite::Random { threshold } => random_loop(loop_stmt, threshold),
    }
}

fn int_decl(name: &str, init: Expr) -> Stmt {
    Stmt::Decl {
        name: name.to_string(),
        ty: Type::scalar(ScalarType::Int),
        init: Some(init),
        span: Span::ZERO,
    }
}

/// Rewrite a counted loop to execute the first `ceil((1-q) * N)` of its `N`
/// iterations. The factor is quantized to parts-per-million so the kept-trip
/// arithmetic stays in integers: `keep = N - floor(q * N)`, which equals
/// `ceil((1-q) * N)` exactly.
fn truncate_counted(loop_stmt: Stmt, factor: f64, step_lit: i64, names: &mut Namer) -> Vec<Stmt> {
    let Stmt::For {
        var,
        init,
        bound,
        step,
        body,
        span,
    } = loop_stmt
    else {
        unreachable!("truncation target verified as for-loop")
    };
    let q_ppm = (factor * 1e6).round() as i64;
    let start = names.fresh("trunc_start");
    let limit = names.fresh("trunc_limit");
    let span_v = names.fresh("trunc_span");
    let trips = names.fresh("trunc_trips");
    let keep = names.fresh("trunc_keep");
    let end = names.fresh("trunc_end");

    // trips = ceil(span / step) for positive spans
    let ceil_trips = Stmt::If {
        cond: Expr::compare(CmpOp::Gt, Expr::var(&span_v), Expr::int(0)),
        then_body: vec![Stmt::Assign {
            target: LValue::Var {
                name: trips.clone(),
                span: Span::ZERO,
            },
            value: Expr::binary(
                BinOp::Div,
                Expr::binary(BinOp::Add, Expr::var(&span_v), Expr::int(step_lit - 1)),
                Expr::int(step_lit),
            ),
            span: Span::ZERO,
        }],
        else_body: Vec::new(),
        span: Span::ZERO,
    };
    vec![
        int_decl(&start, init),
        int_decl(&limit, bound),
        int_decl(
            &span_v,
            Expr::binary(BinOp::Sub, Expr::var(&limit), Expr::var(&start)),
        ),
        int_decl(&trips, Expr::int(0)),
        ceil_trips,
        int_decl(
            &keep,
            Expr::binary(
                BinOp::Sub,
                Expr::var(&trips),
                Expr::binary(
                    BinOp::Div,
                    Expr::binary(BinOp::Mul, Expr::var(&trips), Expr::int(q_ppm)),
                    Expr::int(1_000_000),
                ),
            ),
        ),
        int_decl(
            &end,
            Expr::binary(
                BinOp::Add,
                Expr::var(&start),
                Expr::binary(BinOp::Mul, Expr::var(&keep), Expr::int(step_lit)),
            ),
        ),
        Stmt::For {
            var,
            init: Expr::var(&start),
            bound: Expr::var(&end),
            step,
            body,
            span,
        },
    ]
}

/// Guard the body on `counter % factor == 0`; loop control still advances
/// every iteration.
fn sample_loop(loop_stmt: Stmt, factor: u32, names: &mut Namer) -> Vec<Stmt> {
    let counter = names.fresh("samp_k");
    let guard = |body: Vec<Stmt>| -> Vec<Stmt> {
        vec![
            Stmt::If {
                cond: Expr::compare(
                    CmpOp::Eq,
                    Expr::binary(BinOp::Mod, Expr::var(&counter), Expr::int(factor as i64)),
                    Expr::int(0),
                ),
                then_body: body,
                else_body: Vec::new(),
                span: Span::ZERO,
            },
            Stmt::Assign {
                target: LValue::Var {
                    name: counter.clone(),
                    span: Span::ZERO,
                },
                value: Expr::binary(BinOp::Add, Expr::var(&counter), Expr::int(1)),
                span: Span::ZERO,
            },
        ]
    };
    let decl = int_decl(&counter, Expr::int(0));
    match loop_stmt {
        Stmt::For {
            var,
            init,
            bound,
            step,
            body,
            span,
        } => vec![
            decl,
            Stmt::For {
                var,
                init,
                bound,
                step,
                body: guard(body),
                span,
            },
        ],
        Stmt::While { cond, body, span } => {
            vec![
                decl,
                Stmt::While {
                    cond,
                    body: guard(body),
                    span,
                },
            ]
        }
        _ => unreachable!("sampling target verified as loop"),
    }
}

/// Guard the body on `rand() >= threshold`: skip iff the draw is below it.
fn random_loop(loop_stmt: Stmt, threshold: f64) -> Vec<Stmt> {
    let guard = |body: Vec<Stmt>| -> Vec<Stmt> {
        vec![Stmt::If {
            cond: Expr::compare(
                CmpOp::Ge,
                Expr::IntrinsicCall {
                    kind: Intrinsic::Rand,
                    args: Vec::new(),
                    span: Span::ZERO,
                },
                Expr::float(threshold),
            ),
            then_body: body,
            else_body: Vec::new(),
            span: Span::ZERO,
        }]
    };
    match loop_stmt {
        Stmt::For {
            var,
            init,
            bound,
            step,
            body,
            span,
        } => {
            vec![Stmt::For {
                var,
                init,
                bound,
                step,
                body: guard(body),
                span,
            }]
        }
        Stmt::While { cond, body, span } => {
            vec![Stmt::While {
                cond,
                body: guard(body),
                span,
            }]
        }
        _ => unreachable!("random target verified as loop"),
    }
}
