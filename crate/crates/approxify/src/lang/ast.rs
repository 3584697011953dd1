//! Syntax tree for ApproxC programs.
//!
//! Every node records the source span it was parsed from. Spans are ignored
//! by structural equality (see [`Program::normalized`]) so that a program and
//! its pretty-printed-then-reparsed twin compare equal node by node.

use std::fmt;

/// Byte-oriented source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const ZERO: Span = Span { line: 0, col: 0 };

    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

/// Path of child indices identifying a node inside one function.
///
/// Child numbering is structural: an `if` orders `cond, then.., else..`,
/// a `for` orders `init, bound, step, body..`, a `while` orders `cond, body..`.
/// The empty path names the function itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodePath(pub Vec<u32>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn child(&self, idx: u32) -> Self {
        let mut v = self.0.clone();
        v.push(idx);
        NodePath(v)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, ".");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    Int,
    Float,
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarType::Int => write!(f, "int"),
            ScalarType::Float => write!(f, "float"),
        }
    }
}

/// Variable type: scalar, or 1-D/2-D array of scalars with fixed dims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Type {
    pub scalar: ScalarType,
    pub dims: Vec<u32>,
}

impl Type {
    pub fn scalar(s: ScalarType) -> Self {
        Type {
            scalar: s,
            dims: Vec::new(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.dims.is_empty()
    }
}

/// Declared output channel of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Numeric,
    Text,
    Image { rows: u32, cols: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Builtin functions callable from expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intrinsic {
    Abs,
    Min,
    Max,
    Exp,
    Sqrt,
    Rand,
    InNum,
    InPixel,
    InLen,
}

impl Intrinsic {
    pub fn name(self) -> &'static str {
        match self {
            Intrinsic::Abs => "abs",
            Intrinsic::Min => "min",
            Intrinsic::Max => "max",
            Intrinsic::Exp => "exp",
            Intrinsic::Sqrt => "sqrt",
            Intrinsic::Rand => "rand",
            Intrinsic::InNum => "in_num",
            Intrinsic::InPixel => "in_pixel",
            Intrinsic::InLen => "in_len",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Intrinsic::Abs,
            "min" => Intrinsic::Min,
            "max" => Intrinsic::Max,
            "exp" => Intrinsic::Exp,
            "sqrt" => Intrinsic::Sqrt,
            "rand" => Intrinsic::Rand,
            "in_num" => Intrinsic::InNum,
            "in_pixel" => Intrinsic::InPixel,
            "in_len" => Intrinsic::InLen,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Intrinsic::Abs | Intrinsic::Exp | Intrinsic::Sqrt | Intrinsic::InNum => 1,
            Intrinsic::Min | Intrinsic::Max | Intrinsic::InPixel => 2,
            Intrinsic::Rand | Intrinsic::InLen => 0,
        }
    }
}

/// Output-channel statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitKind {
    Num,
    Pixel,
    Word,
}

impl EmitKind {
    pub fn name(self) -> &'static str {
        match self {
            EmitKind::Num => "emit_num",
            EmitKind::Pixel => "emit_pixel",
            EmitKind::Word => "emit_word",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "emit_num" => EmitKind::Num,
            "emit_pixel" => EmitKind::Pixel,
            "emit_word" => EmitKind::Word,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    IntLit {
        value: i64,
        span: Span,
    },
    FloatLit {
        value: f64,
        span: Span,
    },
    Var {
        name: String,
        span: Span,
    },
    Index {
        name: String,
        indices: Vec<Expr>,
        span: Span,
    },
    Unary {
        expr: Box<Expr>,
        span: Span,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    Compare {
        op: CmpOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    Call {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
    IntrinsicCall {
        kind: Intrinsic,
        args: Vec<Expr>,
        span: Span,
    },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::IntLit { span, .. }
            | Expr::FloatLit { span, .. }
            | Expr::Var { span, .. }
            | Expr::Index { span, .. }
            | Expr::Unary { span, .. }
            | Expr::Binary { span, .. }
            | Expr::Compare { span, .. }
            | Expr::Call { span, .. }
            | Expr::IntrinsicCall { span, .. } => *span,
        }
    }

    pub fn int(value: i64) -> Expr {
        Expr::IntLit {
            value,
            span: Span::ZERO,
        }
    }

    pub fn float(value: f64) -> Expr {
        Expr::FloatLit {
            value,
            span: Span::ZERO,
        }
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var {
            name: name.to_string(),
            span: Span::ZERO,
        }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            span: Span::ZERO,
        }
    }

    pub fn compare(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Compare {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            span: Span::ZERO,
        }
    }
}

/// Assignment target: scalar variable or array element.
#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var {
        name: String,
        span: Span,
    },
    Index {
        name: String,
        indices: Vec<Expr>,
        span: Span,
    },
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var { name, .. } | LValue::Index { name, .. } => name,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            LValue::Var { span, .. } | LValue::Index { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Decl {
        name: String,
        ty: Type,
        init: Option<Expr>,
        span: Span,
    },
    Assign {
        target: LValue,
        value: Expr,
        span: Span,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
        span: Span,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
        span: Span,
    },
    /// `for (var NAME: int = INIT; NAME < BOUND; NAME = NAME + STEP) { .. }`
    For {
        var: String,
        init: Expr,
        bound: Expr,
        step: Expr,
        body: Vec<Stmt>,
        span: Span,
    },
    Return {
        value: Option<Expr>,
        span: Span,
    },
    /// Call in statement position; only void user functions.
    Call {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
    /// `emit_num(e)` / `emit_pixel(r, c, v)` / `emit_word("lit")`.
    /// For `Word`, `args` is empty and `word` holds the string-table index.
    Emit {
        kind: EmitKind,
        args: Vec<Expr>,
        word: Option<u32>,
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Decl { span, .. }
            | Stmt::Assign { span, .. }
            | Stmt::If { span, .. }
            | Stmt::While { span, .. }
            | Stmt::For { span, .. }
            | Stmt::Return { span, .. }
            | Stmt::Call { span, .. }
            | Stmt::Emit { span, .. } => *span,
        }
    }

    pub fn is_loop(&self) -> bool {
        matches!(self, Stmt::While { .. } | Stmt::For { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoAttr {
    pub tolerance: f64,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: ScalarType,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<ScalarType>,
    pub body: Vec<Stmt>,
    /// Set by the memoization transform (or a source `@memo(tol, cap)` attribute).
    pub memo: Option<MemoAttr>,
    pub span: Span,
}

/// Top-level variable. Initializers are literal-only; arrays zero-initialize.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: Type,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub output_decl: OutputKind,
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<FunctionDecl>,
    pub string_table: Vec<String>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    /// Intern a string literal, returning its table index.
    pub fn intern(&mut self, s: &str) -> u32 {
        if let Some(i) = self.string_table.iter().position(|t| t == s) {
            return i as u32;
        }
        self.string_table.push(s.to_string());
        (self.string_table.len() - 1) as u32
    }

    /// Copy with all spans zeroed, for structural comparison.
    pub fn normalized(&self) -> Program {
        let mut p = self.clone();
        for g in &mut p.globals {
            g.span = Span::ZERO;
            if let Some(e) = &mut g.init {
                zero_expr(e);
            }
        }
        for f in &mut p.functions {
            f.span = Span::ZERO;
            for param in &mut f.params {
                param.span = Span::ZERO;
            }
            zero_stmts(&mut f.body);
        }
        p
    }
}

fn zero_stmts(stmts: &mut [Stmt]) {
    for s in stmts {
        zero_stmt(s);
    }
}

fn zero_stmt(s: &mut Stmt) {
    match s {
        Stmt::Decl { init, span, .. } => {
            *span = Span::ZERO;
            if let Some(e) = init {
                zero_expr(e);
            }
        }
        Stmt::Assign {
            target,
            value,
            span,
        } => {
            *span = Span::ZERO;
            match target {
                LValue::Var { span, .. } => *span = Span::ZERO,
                LValue::Index { indices, span, .. } => {
                    *span = Span::ZERO;
                    for i in indices {
                        zero_expr(i);
                    }
                }
            }
            zero_expr(value);
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
            span,
        } => {
            *span = Span::ZERO;
            zero_expr(cond);
            zero_stmts(then_body);
            zero_stmts(else_body);
        }
        Stmt::While { cond, body, span } => {
            *span = Span::ZERO;
            zero_expr(cond);
            zero_stmts(body);
        }
        Stmt::For {
            init,
            bound,
            step,
            body,
            span,
            ..
        } => {
            *span = Span::ZERO;
            zero_expr(init);
            zero_expr(bound);
            zero_expr(step);
            zero_stmts(body);
        }
        Stmt::Return { value, span } => {
            *span = Span::ZERO;
            if let Some(e) = value {
                zero_expr(e);
            }
        }
        Stmt::Call { args, span, .. } | Stmt::Emit { args, span, .. } => {
            *span = Span::ZERO;
            for a in args {
                zero_expr(a);
            }
        }
    }
}

fn zero_expr(e: &mut Expr) {
    match e {
        Expr::IntLit { span, .. } | Expr::FloatLit { span, .. } | Expr::Var { span, .. } => {
            *span = Span::ZERO;
        }
        Expr::Index { indices, span, .. } => {
            *span = Span::ZERO;
            for i in indices {
                zero_expr(i);
            }
        }
        Expr::Unary { expr, span } => {
            *span = Span::ZERO;
            zero_expr(expr);
        }
        Expr::Binary { lhs, rhs, span, .. } | Expr::Compare { lhs, rhs, span, .. } => {
            *span = Span::ZERO;
            zero_expr(lhs);
            zero_expr(rhs);
        }
        Expr::Call { args, span, .. } | Expr::IntrinsicCall { args, span, .. } => {
            *span = Span::ZERO;
            for a in args {
                zero_expr(a);
            }
        }
    }
}
