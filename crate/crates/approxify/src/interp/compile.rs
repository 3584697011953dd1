//! Lowering of validated programs to a flat instruction form.
//!
//! Each instruction corresponds to one executed syntax node, so cycle
//! accounting is a per-instruction table lookup and execution state is a
//! plain (frames, stack, pc) machine that can be snapshotted anywhere.

use std::collections::HashMap;

use crate::lang::{
    BinOp, CmpOp, EmitKind, Expr, FunctionDecl, Intrinsic, LValue, MemoAttr, NodePath, OutputKind,
    Program, ScalarType, Stmt, Type,
};

/// Cost classification of an executed instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    Literal,
    Load,
    Store,
    IntArith,
    FloatArith,
    Compare,
    Branch,
    ArrayAccess,
    Call,
    Return,
    Intrinsic,
    RngDraw,
    Emit,
    Coerce,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    PushInt(i64),
    PushFloat(f64),
    LoadLocal(u16),
    LoadGlobal(u16),
    StoreLocal(u16),
    StoreGlobal(u16),
    /// Reset a slot to its default value (decl without initializer, arrays).
    InitLocal(u16),
    /// Pops indices (last dimension on top) and pushes the element.
    LoadElemLocal(u16),
    LoadElemGlobal(u16),
    /// Pops value, then indices, and stores the element.
    StoreElemLocal(u16),
    StoreElemGlobal(u16),
    IntArith(BinOp),
    FloatArith(BinOp),
    NegInt,
    NegFloat,
    /// Widen the int on top of the stack; charged as zero-cost.
    IntToFloat,
    CmpInt(CmpOp),
    CmpFloat(CmpOp),
    Jump(u32),
    JumpIfFalse(u32),
    /// Loop back-edge; a checkpoint trigger point.
    JumpBack(u32),
    Call(u16),
    Ret,
    IntrAbsInt,
    IntrAbsFloat,
    IntrMinInt,
    IntrMinFloat,
    IntrMaxInt,
    IntrMaxFloat,
    IntrExp,
    IntrSqrt,
    IntrRand,
    IntrInNum,
    IntrInPixel,
    IntrInLen,
    EmitNum,
    EmitPixel,
    EmitWord(u32),
}

impl Op {
    pub fn cost_kind(&self) -> CostKind {
        match self {
            Op::PushInt(_) | Op::PushFloat(_) => CostKind::Literal,
            Op::LoadLocal(_) | Op::LoadGlobal(_) => CostKind::Load,
            Op::StoreLocal(_) | Op::StoreGlobal(_) | Op::InitLocal(_) => CostKind::Store,
            Op::LoadElemLocal(_)
            | Op::LoadElemGlobal(_)
            | Op::StoreElemLocal(_)
            | Op::StoreElemGlobal(_) => CostKind::ArrayAccess,
            Op::IntArith(_) | Op::NegInt => CostKind::IntArith,
            Op::FloatArith(_) | Op::NegFloat => CostKind::FloatArith,
            Op::IntToFloat => CostKind::Coerce,
            Op::CmpInt(_) | Op::CmpFloat(_) => CostKind::Compare,
            Op::Jump(_) | Op::JumpIfFalse(_) | Op::JumpBack(_) => CostKind::Branch,
            Op::Call(_) => CostKind::Call,
            Op::Ret => CostKind::Return,
            Op::IntrRand => CostKind::RngDraw,
            Op::IntrAbsInt
            | Op::IntrAbsFloat
            | Op::IntrMinInt
            | Op::IntrMinFloat
            | Op::IntrMaxInt
            | Op::IntrMaxFloat
            | Op::IntrExp
            | Op::IntrSqrt
            | Op::IntrInNum
            | Op::IntrInPixel
            | Op::IntrInLen => CostKind::Intrinsic,
            Op::EmitNum | Op::EmitPixel | Op::EmitWord(_) => CostKind::Emit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotInfo {
    pub name: String,
    pub scalar: ScalarType,
    pub dims: Vec<u32>,
}

impl SlotInfo {
    pub fn element_count(&self) -> usize {
        self.dims.iter().product::<u32>().max(1) as usize
    }

    pub fn is_array(&self) -> bool {
        !self.dims.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CompiledFunction {
    pub name: String,
    pub n_params: u16,
    pub ret: Option<ScalarType>,
    pub slots: Vec<SlotInfo>,
    pub ops: Vec<Op>,
    /// Per op: index into [`CompiledProgram::paths`] of the enclosing statement.
    pub op_paths: Vec<u32>,
    pub memo: Option<MemoAttr>,
}

/// Initial value of a global slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlobalInit {
    Int(i64),
    Float(f64),
    Default,
}

#[derive(Debug, Clone)]
pub struct CompiledProgram {
    pub functions: Vec<CompiledFunction>,
    pub globals: Vec<SlotInfo>,
    pub global_inits: Vec<GlobalInit>,
    pub output_decl: OutputKind,
    pub string_table: Vec<String>,
    pub main: u16,
    /// Statement paths referenced by `op_paths`: (function index, path).
    pub paths: Vec<(u16, NodePath)>,
}

/// Lower a validated program. Panics on trees that violate the language
/// invariants; run validation first.
pub fn compile(p: &Program) -> CompiledProgram {
    let fn_indices: HashMap<&str, u16> = p
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i as u16))
        .collect();

    let globals: Vec<SlotInfo> = p
        .globals
        .iter()
        .map(|g| SlotInfo {
            name: g.name.clone(),
            scalar: g.ty.scalar,
            dims: g.ty.dims.clone(),
        })
        .collect();
    let global_inits: Vec<GlobalInit> = p.globals.iter().map(global_init_value).collect();

    let mut paths = Vec::new();
    let functions: Vec<CompiledFunction> = p
        .functions
        .iter()
        .enumerate()
        .map(|(idx, f)| {
            let mut fc = FnCompiler::new(p, f, idx as u16, &fn_indices, &globals, &mut paths);
            fc.lower_body();
            fc.finish()
        })
        .collect();

    CompiledProgram {
        main: fn_indices["main"],
        functions,
        globals,
        global_inits,
        output_decl: p.output_decl,
        string_table: p.string_table.clone(),
        paths,
    }
}

fn global_init_value(g: &crate::lang::GlobalDecl) -> GlobalInit {
    fn literal(e: &Expr, negate: bool) -> Option<(f64, Option<i64>)> {
        match e {
            Expr::IntLit { value, .. } => {
                let v = if negate { -value } else { *value };
                Some((v as f64, Some(v)))
            }
            Expr::FloatLit { value, .. } => {
                let v = if negate { -value } else { *value };
                Some((v, None))
            }
            Expr::Unary { expr, .. } if !negate => literal(expr, true),
            _ => None,
        }
    }
    match &g.init {
        None => GlobalInit::Default,
        Some(e) => {
            let (f, i) = literal(e, false).expect("validated literal initializer");
            match g.ty.scalar {
                ScalarType::Int => GlobalInit::Int(i.expect("validated int literal")),
                ScalarType::Float => GlobalInit::Float(f),
            }
        }
    }
}

struct FnCompiler<'a> {
    program: &'a Program,
    func: &'a FunctionDecl,
    func_idx: u16,
    fn_indices: &'a HashMap<&'a str, u16>,
    global_slots: &'a [SlotInfo],
    paths: &'a mut Vec<(u16, NodePath)>,
    slots: Vec<SlotInfo>,
    locals: HashMap<String, u16>,
    global_indices: HashMap<String, u16>,
    ops: Vec<Op>,
    op_paths: Vec<u32>,
    current_path: u32,
}

#[derive(Clone, Copy)]
enum VarRef {
    Local(u16),
    Global(u16),
}

impl<'a> FnCompiler<'a> {
    fn new(
        program: &'a Program,
        func: &'a FunctionDecl,
        func_idx: u16,
        fn_indices: &'a HashMap<&'a str, u16>,
        global_slots: &'a [SlotInfo],
        paths: &'a mut Vec<(u16, NodePath)>,
    ) -> Self {
        let mut slots = Vec::new();
        let mut locals = HashMap::new();
        for p in &func.params {
            locals.insert(p.name.clone(), slots.len() as u16);
            slots.push(SlotInfo {
                name: p.name.clone(),
                scalar: p.ty,
                dims: Vec::new(),
            });
        }
        let global_indices = global_slots
            .iter()
            .enumerate()
            .map(|(i, g)| (g.name.clone(), i as u16))
            .collect();
        FnCompiler {
            program,
            func,
            func_idx,
            fn_indices,
            global_slots,
            paths,
            slots,
            locals,
            global_indices,
            ops: Vec::new(),
            op_paths: Vec::new(),
            current_path: 0,
        }
    }

    fn finish(mut self) -> CompiledFunction {
        // implicit return at end of body
        self.set_path(NodePath::root());
        if let Some(rt) = self.func.ret {
            match rt {
                ScalarType::Int => self.emit(Op::PushInt(0)),
                ScalarType::Float => self.emit(Op::PushFloat(0.0)),
            }
        }
        self.emit(Op::Ret);
        CompiledFunction {
            name: self.func.name.clone(),
            n_params: self.func.params.len() as u16,
            ret: self.func.ret,
            slots: self.slots,
            ops: self.ops,
            op_paths: self.op_paths,
            memo: self.func.memo,
        }
    }

    fn set_path(&mut self, path: NodePath) {
        self.paths.push((self.func_idx, path));
        self.current_path = (self.paths.len() - 1) as u32;
    }

    fn emit(&mut self, op: Op) {
        self.ops.push(op);
        self.op_paths.push(self.current_path);
    }

    fn here(&self) -> u32 {
        self.ops.len() as u32
    }

    fn patch(&mut self, at: u32, target: u32) {
        match &mut self.ops[at as usize] {
            Op::Jump(t) | Op::JumpIfFalse(t) | Op::JumpBack(t) => *t = target,
            other => panic!("patching non-jump op {other:?}"),
        }
    }

    fn var(&self, name: &str) -> VarRef {
        if let Some(&slot) = self.locals.get(name) {
            VarRef::Local(slot)
        } else {
            VarRef::Global(self.global_indices[name])
        }
    }

    fn slot_info(&self, v: VarRef) -> &SlotInfo {
        match v {
            VarRef::Local(i) => &self.slots[i as usize],
            VarRef::Global(i) => &self.global_slots[i as usize],
        }
    }

    fn declare_local(&mut self, name: &str, ty: &Type) -> u16 {
        let slot = self.slots.len() as u16;
        self.locals.insert(name.to_string(), slot);
        self.slots.push(SlotInfo {
            name: name.to_string(),
            scalar: ty.scalar,
            dims: ty.dims.clone(),
        });
        slot
    }

    fn lower_body(&mut self) {
        let body: &[Stmt] = &self.func.body;
        self.lower_stmts(body, &NodePath::root());
    }

    fn lower_stmts(&mut self, stmts: &[Stmt], base: &NodePath) {
        for (i, s) in stmts.iter().enumerate() {
            self.lower_stmt(s, base.child(i as u32));
        }
    }

    fn lower_stmt(&mut self, s: &Stmt, path: NodePath) {
        self.set_path(path.clone());
        match s {
            Stmt::Decl { name, ty, init, .. } => {
                let slot = match self.locals.get(name) {
                    Some(&slot) => slot,
                    None => self.declare_local(name, ty),
                };
                match init {
                    Some(e) => {
                        let et = self.lower_expr(e);
                        self.coerce(et, ty.scalar);
                        self.emit(Op::StoreLocal(slot));
                    }
                    None => self.emit(Op::InitLocal(slot)),
                }
            }
            Stmt::Assign { target, value, .. } => match target {
                LValue::Var { name, .. } => {
                    let v = self.var(name);
                    let want = self.slot_info(v).scalar;
                    let got = self.lower_expr(value);
                    self.coerce(got, want);
                    match v {
                        VarRef::Local(i) => self.emit(Op::StoreLocal(i)),
                        VarRef::Global(i) => self.emit(Op::StoreGlobal(i)),
                    }
                }
                LValue::Index { name, indices, .. } => {
                    let v = self.var(name);
                    let want = self.slot_info(v).scalar;
                    for idx in indices {
                        self.lower_expr(idx);
                    }
                    let got = self.lower_expr(value);
                    self.coerce(got, want);
                    match v {
                        VarRef::Local(i) => self.emit(Op::StoreElemLocal(i)),
                        VarRef::Global(i) => self.emit(Op::StoreElemGlobal(i)),
                    }
                }
            },
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                self.lower_expr(cond);
                let jf = self.here();
                self.emit(Op::JumpIfFalse(0));
                self.lower_stmts_at(then_body, &path, 1);
                if else_body.is_empty() {
                    let end = self.here();
                    self.patch(jf, end);
                } else {
                    self.set_path(path.clone());
                    let jend = self.here();
                    self.emit(Op::Jump(0));
                    let else_at = self.here();
                    self.patch(jf, else_at);
                    self.lower_stmts_at(else_body, &path, 1 + then_body.len() as u32);
                    let end = self.here();
                    self.patch(jend, end);
                }
            }
            Stmt::While { cond, body, .. } => {
                let head = self.here();
                self.lower_expr(cond);
                let jf = self.here();
                self.emit(Op::JumpIfFalse(0));
                self.lower_stmts_at(body, &path, 1);
                self.set_path(path.clone());
                self.emit(Op::JumpBack(head));
                let end = self.here();
                self.patch(jf, end);
            }
            Stmt::For {
                var,
                init,
                bound,
                step,
                body,
                ..
            } => {
                let slot = match self.locals.get(var) {
                    Some(&slot) => slot,
                    None => self.declare_local(var, &Type::scalar(ScalarType::Int)),
                };
                self.lower_expr(init);
                self.emit(Op::StoreLocal(slot));
                let head = self.here();
                self.emit(Op::LoadLocal(slot));
                self.lower_expr(bound);
                self.emit(Op::CmpInt(CmpOp::Lt));
                let jf = self.here();
                self.emit(Op::JumpIfFalse(0));
                self.lower_stmts_at(body, &path, 3);
                self.set_path(path.clone());
                self.emit(Op::LoadLocal(slot));
                self.lower_expr(step);
                self.emit(Op::IntArith(BinOp::Add));
                self.emit(Op::StoreLocal(slot));
                self.emit(Op::JumpBack(head));
                let end = self.here();
                self.patch(jf, end);
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    let et = self.lower_expr(e);
                    self.coerce(et, self.func.ret.expect("validated return type"));
                }
                self.emit(Op::Ret);
            }
            Stmt::Call { name, args, .. } => {
                self.lower_call(name, args);
            }
            Stmt::Emit {
                kind, args, word, ..
            } => match kind {
                EmitKind::Num => {
                    let t = self.lower_expr(&args[0]);
                    self.coerce(t, ScalarType::Float);
                    self.emit(Op::EmitNum);
                }
                EmitKind::Pixel => {
                    self.lower_expr(&args[0]);
                    self.lower_expr(&args[1]);
                    let t = self.lower_expr(&args[2]);
                    self.coerce(t, ScalarType::Float);
                    self.emit(Op::EmitPixel);
                }
                EmitKind::Word => {
                    self.emit(Op::EmitWord(word.expect("emit_word index")));
                }
            },
        }
    }

    /// Lower nested statements whose paths start at `base.child(offset)`.
    fn lower_stmts_at(&mut self, stmts: &[Stmt], base: &NodePath, offset: u32) {
        for (i, s) in stmts.iter().enumerate() {
            self.lower_stmt(s, base.child(offset + i as u32));
        }
    }

    fn coerce(&mut self, from: ScalarType, to: ScalarType) {
        if from == ScalarType::Int && to == ScalarType::Float {
            self.emit(Op::IntToFloat);
        }
    }

    fn lower_call(&mut self, name: &str, args: &[Expr]) -> Option<ScalarType> {
        let fi = self.fn_indices[name];
        let callee = &self.program.functions[fi as usize];
        let param_types: Vec<ScalarType> = callee.params.iter().map(|p| p.ty).collect();
        for (a, want) in args.iter().zip(param_types) {
            let got = self.lower_expr(a);
            self.coerce(got, want);
        }
        self.emit(Op::Call(fi));
        callee.ret
    }

    /// Lower an expression, returning its static type.
    fn lower_expr(&mut self, e: &Expr) -> ScalarType {
        match e {
            Expr::IntLit { value, .. } => {
                self.emit(Op::PushInt(*value));
                ScalarType::Int
            }
            Expr::FloatLit { value, .. } => {
                self.emit(Op::PushFloat(*value));
                ScalarType::Float
            }
            Expr::Var { name, .. } => {
                let v = self.var(name);
                let t = self.slot_info(v).scalar;
                match v {
                    VarRef::Local(i) => self.emit(Op::LoadLocal(i)),
                    VarRef::Global(i) => self.emit(Op::LoadGlobal(i)),
                }
                t
            }
            Expr::Index { name, indices, .. } => {
                let v = self.var(name);
                let t = self.slot_info(v).scalar;
                for idx in indices {
                    self.lower_expr(idx);
                }
                match v {
                    VarRef::Local(i) => self.emit(Op::LoadElemLocal(i)),
                    VarRef::Global(i) => self.emit(Op::LoadElemGlobal(i)),
                }
                t
            }
            Expr::Unary { expr, .. } => match self.lower_expr(expr) {
                ScalarType::Int => {
                    self.emit(Op::NegInt);
                    ScalarType::Int
                }
                ScalarType::Float => {
                    self.emit(Op::NegFloat);
                    ScalarType::Float
                }
            },
            Expr::Binary { op, lhs, rhs, .. } => {
                let lt = self.expr_type(lhs);
                let rt = self.expr_type(rhs);
                if lt == ScalarType::Int && rt == ScalarType::Int {
                    self.lower_expr(lhs);
                    self.lower_expr(rhs);
                    self.emit(Op::IntArith(*op));
                    ScalarType::Int
                } else {
                    self.lower_expr(lhs);
                    self.coerce(lt, ScalarType::Float);
                    self.lower_expr(rhs);
                    self.coerce(rt, ScalarType::Float);
                    self.emit(Op::FloatArith(*op));
                    ScalarType::Float
                }
            }
            Expr::Compare { op, lhs, rhs, .. } => {
                let lt = self.expr_type(lhs);
                let rt = self.expr_type(rhs);
                if lt == ScalarType::Int && rt == ScalarType::Int {
                    self.lower_expr(lhs);
                    self.lower_expr(rhs);
                    self.emit(Op::CmpInt(*op));
                } else {
                    self.lower_expr(lhs);
                    self.coerce(lt, ScalarType::Float);
                    self.lower_expr(rhs);
                    self.coerce(rt, ScalarType::Float);
                    self.emit(Op::CmpFloat(*op));
                }
                ScalarType::Int
            }
            Expr::Call { name, args, .. } => self
                .lower_call(name, args)
                .expect("validated non-void call"),
            Expr::IntrinsicCall { kind, args, .. } => match kind {
                Intrinsic::Abs => {
                    let t = self.lower_expr(&args[0]);
                    match t {
                        ScalarType::Int => self.emit(Op::IntrAbsInt),
                        ScalarType::Float => self.emit(Op::IntrAbsFloat),
                    }
                    t
                }
                Intrinsic::Min | Intrinsic::Max => {
                    let lt = self.expr_type(&args[0]);
                    let rt = self.expr_type(&args[1]);
                    let both_int = lt == ScalarType::Int && rt == ScalarType::Int;
                    self.lower_expr(&args[0]);
                    if !both_int {
                        self.coerce(lt, ScalarType::Float);
                    }
                    self.lower_expr(&args[1]);
                    if !both_int {
                        self.coerce(rt, ScalarType::Float);
                    }
                    let op = match (kind, both_int) {
                        (Intrinsic::Min, true) => Op::IntrMinInt,
                        (Intrinsic::Min, false) => Op::IntrMinFloat,
                        (Intrinsic::Max, true) => Op::IntrMaxInt,
                        (Intrinsic::Max, false) => Op::IntrMaxFloat,
                        _ => unreachable!(),
                    };
                    self.emit(op);
                    if both_int {
                        ScalarType::Int
                    } else {
                        ScalarType::Float
                    }
                }
                Intrinsic::Exp | Intrinsic::Sqrt => {
                    let t = self.lower_expr(&args[0]);
                    self.coerce(t, ScalarType::Float);
                    self.emit(if *kind == Intrinsic::Exp {
                        Op::IntrExp
                    } else {
                        Op::IntrSqrt
                    });
                    ScalarType::Float
                }
                Intrinsic::Rand => {
                    self.emit(Op::IntrRand);
                    ScalarType::Float
                }
                Intrinsic::InNum => {
                    self.lower_expr(&args[0]);
                    self.emit(Op::IntrInNum);
                    ScalarType::Float
                }
                Intrinsic::InPixel => {
                    self.lower_expr(&args[0]);
                    self.lower_expr(&args[1]);
                    self.emit(Op::IntrInPixel);
                    ScalarType::Float
                }
                Intrinsic::InLen => {
                    self.emit(Op::IntrInLen);
                    ScalarType::Int
                }
            },
        }
    }

    /// Static type of an expression without emitting code.
    fn expr_type(&self, e: &Expr) -> ScalarType {
        match e {
            Expr::IntLit { .. } => ScalarType::Int,
            Expr::FloatLit { .. } => ScalarType::Float,
            Expr::Var { name, .. } | Expr::Index { name, .. } => {
                self.slot_info(self.var(name)).scalar
            }
            Expr::Unary { expr, .. } => self.expr_type(expr),
            Expr::Binary { lhs, rhs, .. } => {
                if self.expr_type(lhs) == ScalarType::Int && self.expr_type(rhs) == ScalarType::Int
                {
                    ScalarType::Int
                } else {
                    ScalarType::Float
                }
            }
            Expr::Compare { .. } => ScalarType::Int,
            Expr::Call { name, .. } => self
                .program
                .function(name)
                .and_then(|f| f.ret)
                .expect("validated non-void call"),
            Expr::IntrinsicCall { kind, args, .. } => match kind {
                Intrinsic::Abs => self.expr_type(&args[0]),
                Intrinsic::Min | Intrinsic::Max => {
                    if self.expr_type(&args[0]) == ScalarType::Int
                        && self.expr_type(&args[1]) == ScalarType::Int
                    {
                        ScalarType::Int
                    } else {
                        ScalarType::Float
                    }
                }
                Intrinsic::Exp | Intrinsic::Sqrt | Intrinsic::Rand => ScalarType::Float,
                Intrinsic::InNum | Intrinsic::InPixel => ScalarType::Float,
                Intrinsic::InLen => ScalarType::Int,
            },
        }
    }
}
