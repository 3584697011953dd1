//! Explicit-state executor with per-instruction cycle accounting.
//!
//! The whole execution state lives in [`ExecState`]: call frames with
//! instruction-index program counters, the operand stack, globals, the output
//! buffer, the RNG, and memoization caches. Snapshots are plain clones, and
//! resuming a clone is observationally identical to never having snapshotted.

use std::collections::BTreeMap;

use crate::lang::{BinOp, CmpOp, OutputKind, ScalarType};

use super::compile::{CompiledProgram, CostKind, GlobalInit, Op, SlotInfo};
use super::platform::PlatformModel;
use super::rng::XorShift64;
use super::{Fault, InputCase, ProgramOutput};

pub const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
}

impl Value {
    fn as_int(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Float(_) => panic!("type confusion: expected int"),
        }
    }

    fn as_float(self) -> f64 {
        match self {
            Value::Float(v) => v,
            Value::Int(_) => panic!("type confusion: expected float"),
        }
    }

    pub fn as_f64_lossy(self) -> f64 {
        match self {
            Value::Int(v) => v as f64,
            Value::Float(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    Int(i64),
    Float(f64),
    IntArr(Vec<i64>),
    FloatArr(Vec<f64>),
}

impl Slot {
    fn default_for(info: &SlotInfo) -> Slot {
        if info.is_array() {
            match info.scalar {
                ScalarType::Int => Slot::IntArr(vec![0; info.element_count()]),
                ScalarType::Float => Slot::FloatArr(vec![0.0; info.element_count()]),
            }
        } else {
            match info.scalar {
                ScalarType::Int => Slot::Int(0),
                ScalarType::Float => Slot::Float(0.0),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Frame {
    func: u16,
    pc: u32,
    locals: Vec<Slot>,
    stack_base: u32,
    /// Arguments to insert into the memo cache when this frame returns.
    memo_key: Option<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
struct MemoEntry {
    args: Vec<Value>,
    result: Value,
}

/// Most-recently-used-first cache; scans stop at the first tolerant match.
#[derive(Debug, Clone, Default, PartialEq)]
struct MemoCache {
    entries: Vec<MemoEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputBuffer {
    Numeric(Vec<f64>),
    Text(Vec<u32>),
    Image {
        rows: u32,
        cols: u32,
        pixels: Vec<f64>,
    },
}

impl OutputBuffer {
    fn new(kind: OutputKind) -> Self {
        match kind {
            OutputKind::Numeric => OutputBuffer::Numeric(Vec::new()),
            OutputKind::Text => OutputBuffer::Text(Vec::new()),
            OutputKind::Image { rows, cols } => OutputBuffer::Image {
                rows,
                cols,
                pixels: vec![0.0; rows as usize * cols as usize],
            },
        }
    }
}

/// Complete, cloneable execution state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecState {
    frames: Vec<Frame>,
    stack: Vec<Value>,
    globals: Vec<Slot>,
    output: OutputBuffer,
    pub cycles_executed: u64,
    rng: XorShift64,
    memo: Vec<MemoCache>,
    finished: bool,
}

/// Opaque snapshot of an [`ExecState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint(ExecState);

/// Checkpoint trigger points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    LoopBackEdge,
    FunctionReturn,
}

#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub cycles: u64,
    pub trigger: Option<Trigger>,
    pub kind: CostKind,
}

/// Running min/max of numeric arguments observed at calls to one function.
#[derive(Debug, Clone, Copy)]
pub struct ArgRange {
    pub min: f64,
    pub max: f64,
}

pub struct Machine<'a> {
    program: &'a CompiledProgram,
    input: &'a InputCase,
    plat: &'a PlatformModel,
    watchdog: Option<u64>,
    state: ExecState,
    kind_trace: Option<Vec<CostKind>>,
    record_args: bool,
    arg_ranges: BTreeMap<u16, ArgRange>,
}

impl<'a> Machine<'a> {
    pub fn new(
        program: &'a CompiledProgram,
        input: &'a InputCase,
        plat: &'a PlatformModel,
        seed: u64,
    ) -> Self {
        let globals: Vec<Slot> = program
            .globals
            .iter()
            .zip(&program.global_inits)
            .map(|(info, init)| match init {
                GlobalInit::Int(v) => Slot::Int(*v),
                GlobalInit::Float(v) => Slot::Float(*v),
                GlobalInit::Default => Slot::default_for(info),
            })
            .collect();
        let main = program.main;
        let main_fn = &program.functions[main as usize];
        let frame = Frame {
            func: main,
            pc: 0,
            locals: main_fn.slots.iter().map(Slot::default_for).collect(),
            stack_base: 0,
            memo_key: None,
        };
        let state = ExecState {
            frames: vec![frame],
            stack: Vec::new(),
            globals,
            output: OutputBuffer::new(program.output_decl),
            cycles_executed: 0,
            rng: XorShift64::new(seed),
            memo: vec![MemoCache::default(); program.functions.len()],
            finished: false,
        };
        Machine {
            program,
            input,
            plat,
            watchdog: None,
            state,
            kind_trace: None,
            record_args: false,
            arg_ranges: BTreeMap::new(),
        }
    }

    pub fn set_watchdog(&mut self, budget: Option<u64>) {
        self.watchdog = budget;
    }

    /// Record the cost kind of every executed instruction (test oracle support).
    pub fn record_kinds(&mut self) {
        self.kind_trace = Some(Vec::new());
    }

    pub fn kind_trace(&self) -> Option<&[CostKind]> {
        self.kind_trace.as_deref()
    }

    /// Track per-function numeric argument ranges across all calls.
    pub fn record_arg_ranges(&mut self) {
        self.record_args = true;
    }

    pub fn arg_ranges(&self) -> &BTreeMap<u16, ArgRange> {
        &self.arg_ranges
    }

    pub fn finished(&self) -> bool {
        self.state.finished
    }

    pub fn cycles(&self) -> u64 {
        self.state.cycles_executed
    }

    pub fn snapshot(&self) -> Checkpoint {
        Checkpoint(self.state.clone())
    }

    pub fn restore(&mut self, ck: &Checkpoint) {
        self.state = ck.0.clone();
    }

    /// Position marker for progress detection: (frame depth, top pc, cycles).
    pub fn position(&self) -> (usize, u32, u64) {
        let pc = self.state.frames.last().map(|f| f.pc).unwrap_or(0);
        (self.state.frames.len(), pc, self.state.cycles_executed)
    }

    pub fn output(&self) -> ProgramOutput {
        match &self.state.output {
            OutputBuffer::Numeric(v) => ProgramOutput::Numeric(v.clone()),
            OutputBuffer::Text(idx) => ProgramOutput::Text(
                idx.iter()
                    .map(|&i| self.program.string_table[i as usize].clone())
                    .collect(),
            ),
            OutputBuffer::Image { rows, cols, pixels } => ProgramOutput::Image(super::ImageGrid {
                rows: *rows as usize,
                cols: *cols as usize,
                pixels: pixels.clone(),
            }),
        }
    }

    pub fn run_to_end(&mut self) -> Result<(), Fault> {
        while !self.state.finished {
            self.step()?;
        }
        Ok(())
    }

    fn fault_at(&self, kind: FaultKind) -> Fault {
        let frame = self.state.frames.last().expect("fault in live frame");
        let func = &self.program.functions[frame.func as usize];
        let path_idx = func.op_paths[frame.pc as usize];
        let (_, path) = &self.program.paths[path_idx as usize];
        let function = func.name.clone();
        match kind {
            FaultKind::OutOfBounds => Fault::OutOfBounds {
                function,
                path: path.clone(),
            },
            FaultKind::DivisionByZero => Fault::DivisionByZero {
                function,
                path: path.clone(),
            },
        }
    }

    fn cost(&self, kind: CostKind) -> u64 {
        let c = &self.plat.cycle_costs;
        match kind {
            CostKind::Literal => c.literal,
            CostKind::Load => c.load,
            CostKind::Store => c.store,
            CostKind::IntArith => c.int_arith,
            CostKind::FloatArith => c.float_arith,
            CostKind::Compare => c.compare,
            CostKind::Branch => c.branch,
            CostKind::ArrayAccess => c.array_access,
            CostKind::Call => c.call,
            CostKind::Return => c.ret,
            CostKind::Intrinsic => c.intrinsic,
            CostKind::RngDraw => self.plat.rng_draw_cycles,
            CostKind::Emit => c.emit,
            CostKind::Coerce => 0,
        }
    }

    /// Execute one instruction.
    pub fn step(&mut self) -> Result<StepInfo, Fault> {
        if self.state.finished {
            return Ok(StepInfo {
                cycles: 0,
                trigger: None,
                kind: CostKind::Coerce,
            });
        }
        let frame_idx = self.state.frames.len() - 1;
        let (func_idx, pc) = {
            let f = &self.state.frames[frame_idx];
            (f.func, f.pc)
        };
        let func = &self.program.functions[func_idx as usize];
        let op = func.ops[pc as usize];

        let kind = op.cost_kind();
        let mut cycles = self.cost(kind);
        let mut trigger = None;
        let mut next_pc = pc + 1;

        macro_rules! pop {
            () => {
                self.state.stack.pop().expect("operand stack underflow")
            };
        }

        match op {
            Op::PushInt(v) => self.state.stack.push(Value::Int(v)),
            Op::PushFloat(v) => self.state.stack.push(Value::Float(v)),
            Op::LoadLocal(slot) => {
                let v = match &self.state.frames[frame_idx].locals[slot as usize] {
                    Slot::Int(v) => Value::Int(*v),
                    Slot::Float(v) => Value::Float(*v),
                    _ => panic!("loading array slot as scalar"),
                };
                self.state.stack.push(v);
            }
            Op::LoadGlobal(slot) => {
                let v = match &self.state.globals[slot as usize] {
                    Slot::Int(v) => Value::Int(*v),
                    Slot::Float(v) => Value::Float(*v),
                    _ => panic!("loading array slot as scalar"),
                };
                self.state.stack.push(v);
            }
            Op::StoreLocal(slot) => {
                let v = pop!();
                self.state.frames[frame_idx].locals[slot as usize] = match v {
                    Value::Int(i) => Slot::Int(i),
                    Value::Float(f) => Slot::Float(f),
                };
            }
            Op::StoreGlobal(slot) => {
                let v = pop!();
                self.state.globals[slot as usize] = match v {
                    Value::Int(i) => Slot::Int(i),
                    Value::Float(f) => Slot::Float(f),
                };
            }
            Op::InitLocal(slot) => {
                let info = &func.slots[slot as usize];
                self.state.frames[frame_idx].locals[slot as usize] = Slot::default_for(info);
            }
            Op::LoadElemLocal(slot) | Op::LoadElemGlobal(slot) => {
                let info = if matches!(op, Op::LoadElemLocal(_)) {
                    &func.slots[slot as usize]
                } else {
                    &self.program.globals[slot as usize]
                };
                let flat = self.pop_indices(info)?;
                let storage = if matches!(op, Op::LoadElemLocal(_)) {
                    &self.state.frames[frame_idx].locals[slot as usize]
                } else {
                    &self.state.globals[slot as usize]
                };
                let v = match storage {
                    Slot::IntArr(a) => Value::Int(a[flat]),
                    Slot::FloatArr(a) => Value::Float(a[flat]),
                    _ => panic!("indexing scalar slot"),
                };
                self.state.stack.push(v);
            }
            Op::StoreElemLocal(slot) | Op::StoreElemGlobal(slot) => {
                let info = if matches!(op, Op::StoreElemLocal(_)) {
                    &func.slots[slot as usize]
                } else {
                    &self.program.globals[slot as usize]
                };
                let value = pop!();
                let flat = self.pop_indices(info)?;
                let storage = if matches!(op, Op::StoreElemLocal(_)) {
                    &mut self.state.frames[frame_idx].locals[slot as usize]
                } else {
                    &mut self.state.globals[slot as usize]
                };
                match storage {
                    Slot::IntArr(a) => a[flat] = value.as_int(),
                    Slot::FloatArr(a) => a[flat] = value.as_float(),
                    _ => panic!("indexing scalar slot"),
                }
            }
            Op::IntArith(binop) => {
                let r = pop!().as_int();
                let l = pop!().as_int();
                let v = match binop {
                    BinOp::Add => l.wrapping_add(r),
                    BinOp::Sub => l.wrapping_sub(r),
                    BinOp::Mul => l.wrapping_mul(r),
                    BinOp::Div => {
                        if r == 0 {
                            return Err(self.fault_at(FaultKind::DivisionByZero));
                        }
                        l.wrapping_div(r)
                    }
                    BinOp::Mod => {
                        if r == 0 {
                            return Err(self.fault_at(FaultKind::DivisionByZero));
                        }
                        l.wrapping_rem(r)
                    }
                };
                self.state.stack.push(Value::Int(v));
            }
            Op::FloatArith(binop) => {
                let r = pop!().as_float();
                let l = pop!().as_float();
                let v = match binop {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => l / r,
                    BinOp::Mod => unreachable!("float mod rejected by validation"),
                };
                self.state.stack.push(Value::Float(v));
            }
            Op::NegInt => {
                let v = pop!().as_int();
                self.state.stack.push(Value::Int(v.wrapping_neg()));
            }
            Op::NegFloat => {
                let v = pop!().as_float();
                self.state.stack.push(Value::Float(-v));
            }
            Op::IntToFloat => {
                let v = pop!().as_int();
                self.state.stack.push(Value::Float(v as f64));
            }
            Op::CmpInt(cmp) => {
                let r = pop!().as_int();
                let l = pop!().as_int();
                self.state
                    .stack
                    .push(Value::Int(cmp_result(cmp, l.cmp(&r)) as i64));
            }
            Op::CmpFloat(cmp) => {
                let r = pop!().as_float();
                let l = pop!().as_float();
                let v = match cmp {
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                };
                self.state.stack.push(Value::Int(v as i64));
            }
            Op::Jump(t) => next_pc = t,
            Op::JumpIfFalse(t) => {
                if pop!().as_int() == 0 {
                    next_pc = t;
                }
            }
            Op::JumpBack(t) => {
                next_pc = t;
                trigger = Some(Trigger::LoopBackEdge);
            }
            Op::Call(fi) => {
                let callee = &self.program.functions[fi as usize];
                let argc = callee.n_params as usize;
                let args_at = self.state.stack.len() - argc;

                if self.record_args && argc > 0 {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for v in &self.state.stack[args_at..] {
                        let x = v.as_f64_lossy();
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                    let e = self
                        .arg_ranges
                        .entry(fi)
                        .or_insert(ArgRange { min: lo, max: hi });
                    e.min = e.min.min(lo);
                    e.max = e.max.max(hi);
                }

                let mut memo_key = None;
                if let Some(attr) = callee.memo {
                    cycles += self.plat.memo_lookup_base_cycles;
                    let args = self.state.stack[args_at..].to_vec();
                    let cache = &mut self.state.memo[fi as usize];
                    let mut hit = None;
                    for (i, entry) in cache.entries.iter().enumerate() {
                        if memo_match(&entry.args, &args, attr.tolerance) {
                            hit = Some(i);
                            break;
                        }
                    }
                    let scanned = match hit {
                        Some(i) => i + 1,
                        None => cache.entries.len(),
                    };
                    cycles += scanned as u64 * self.plat.memo_scan_cycles_per_entry;
                    if let Some(i) = hit {
                        let entry = cache.entries.remove(i);
                        let result = entry.result;
                        cache.entries.insert(0, entry);
                        self.state.stack.truncate(args_at);
                        self.state.stack.push(result);
                        self.state.frames[frame_idx].pc = next_pc;
                        return self.finish_step(cycles, kind, trigger);
                    }
                    memo_key = Some(args);
                }

                if self.state.frames.len() >= MAX_CALL_DEPTH {
                    return Err(Fault::StackOverflow);
                }
                let mut locals: Vec<Slot> = callee.slots.iter().map(Slot::default_for).collect();
                for slot in (0..argc).rev() {
                    let v = pop!();
                    locals[slot] = match v {
                        Value::Int(i) => Slot::Int(i),
                        Value::Float(f) => Slot::Float(f),
                    };
                }
                let stack_base = self.state.stack.len() as u32;
                self.state.frames[frame_idx].pc = next_pc;
                self.state.frames.push(Frame {
                    func: fi,
                    pc: 0,
                    locals,
                    stack_base,
                    memo_key,
                });
                return self.finish_step(cycles, kind, trigger);
            }
            Op::Ret => {
                trigger = Some(Trigger::FunctionReturn);
                let frame = self.state.frames.pop().expect("return without frame");
                let ret_val = if self.program.functions[frame.func as usize].ret.is_some() {
                    Some(*self.state.stack.last().expect("return value on stack"))
                } else {
                    None
                };
                self.state.stack.truncate(frame.stack_base as usize);
                if let Some(v) = ret_val {
                    self.state.stack.push(v);
                    if let Some(key) = frame.memo_key {
                        let attr = self.program.functions[frame.func as usize]
                            .memo
                            .expect("memo attr");
                        let cache = &mut self.state.memo[frame.func as usize];
                        cache.entries.insert(
                            0,
                            MemoEntry {
                                args: key,
                                result: v,
                            },
                        );
                        if cache.entries.len() > attr.capacity as usize {
                            cache.entries.pop();
                        }
                    }
                }
                if self.state.frames.is_empty() {
                    self.state.finished = true;
                }
                return self.finish_step(cycles, kind, trigger);
            }
            Op::IntrAbsInt => {
                let v = pop!().as_int();
                self.state.stack.push(Value::Int(v.wrapping_abs()));
            }
            Op::IntrAbsFloat => {
                let v = pop!().as_float();
                self.state.stack.push(Value::Float(v.abs()));
            }
            Op::IntrMinInt => {
                let r = pop!().as_int();
                let l = pop!().as_int();
                self.state.stack.push(Value::Int(l.min(r)));
            }
            Op::IntrMinFloat => {
                let r = pop!().as_float();
                let l = pop!().as_float();
                self.state.stack.push(Value::Float(l.min(r)));
            }
            Op::IntrMaxInt => {
                let r = pop!().as_int();
                let l = pop!().as_int();
                self.state.stack.push(Value::Int(l.max(r)));
            }
            Op::IntrMaxFloat => {
                let r = pop!().as_float();
                let l = pop!().as_float();
                self.state.stack.push(Value::Float(l.max(r)));
            }
            Op::IntrExp => {
                let v = pop!().as_float();
                self.state.stack.push(Value::Float(v.exp()));
            }
            Op::IntrSqrt => {
                let v = pop!().as_float();
                self.state.stack.push(Value::Float(v.sqrt()));
            }
            Op::IntrRand => {
                let u = self.state.rng.next_f64();
                self.state.stack.push(Value::Float(u));
            }
            Op::IntrInNum => {
                let idx = pop!().as_int();
                if idx < 0 || idx as usize >= self.input.numbers.len() {
                    return Err(self.fault_at(FaultKind::OutOfBounds));
                }
                self.state
                    .stack
                    .push(Value::Float(self.input.numbers[idx as usize]));
            }
            Op::IntrInPixel => {
                let c = pop!().as_int();
                let r = pop!().as_int();
                let img = match &self.input.image {
                    Some(img) => img,
                    None => return Err(self.fault_at(FaultKind::OutOfBounds)),
                };
                if r < 0 || c < 0 || r as usize >= img.rows || c as usize >= img.cols {
                    return Err(self.fault_at(FaultKind::OutOfBounds));
                }
                let v = img.pixels[r as usize * img.cols + c as usize];
                self.state.stack.push(Value::Float(v));
            }
            Op::IntrInLen => {
                self.state
                    .stack
                    .push(Value::Int(self.input.numbers.len() as i64));
            }
            Op::EmitNum => {
                let v = pop!().as_float();
                match &mut self.state.output {
                    OutputBuffer::Numeric(out) => out.push(v),
                    _ => panic!("emit_num with non-numeric output decl"),
                }
            }
            Op::EmitPixel => {
                let v = pop!().as_float();
                let c = pop!().as_int();
                let r = pop!().as_int();
                match &mut self.state.output {
                    OutputBuffer::Image { rows, cols, pixels } => {
                        if r < 0 || c < 0 || r as u32 >= *rows || c as u32 >= *cols {
                            return Err(self.fault_at(FaultKind::OutOfBounds));
                        }
                        pixels[r as usize * *cols as usize + c as usize] = v;
                    }
                    _ => panic!("emit_pixel with non-image output decl"),
                }
            }
            Op::EmitWord(idx) => match &mut self.state.output {
                OutputBuffer::Text(out) => out.push(idx),
                _ => panic!("emit_word with non-text output decl"),
            },
        }

        self.state.frames[frame_idx].pc = next_pc;
        self.finish_step(cycles, kind, trigger)
    }

    fn finish_step(
        &mut self,
        cycles: u64,
        kind: CostKind,
        trigger: Option<Trigger>,
    ) -> Result<StepInfo, Fault> {
        self.state.cycles_executed += cycles;
        if let Some(trace) = &mut self.kind_trace {
            trace.push(kind);
        }
        if let Some(budget) = self.watchdog {
            if self.state.cycles_executed > budget {
                return Err(Fault::WatchdogExceeded { budget });
            }
        }
        Ok(StepInfo {
            cycles,
            trigger,
            kind,
        })
    }

    /// Pop index values (last dimension on top), bounds-check, and flatten.
    fn pop_indices(&mut self, info: &SlotInfo) -> Result<usize, Fault> {
        let ndims = info.dims.len();
        let mut idx = [0i64; 2];
        for d in (0..ndims).rev() {
            idx[d] = self.state.stack.pop().expect("index on stack").as_int();
        }
        for (&i, &dim) in idx.iter().zip(&info.dims) {
            if i < 0 || i as u64 >= dim as u64 {
                return Err(self.fault_at(FaultKind::OutOfBounds));
            }
        }
        Ok(if ndims == 2 {
            idx[0] as usize * info.dims[1] as usize + idx[1] as usize
        } else {
            idx[0] as usize
        })
    }
}

enum FaultKind {
    OutOfBounds,
    DivisionByZero,
}

fn cmp_result(op: CmpOp, ord: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match op {
        CmpOp::Lt => ord == Less,
        CmpOp::Le => ord != Greater,
        CmpOp::Gt => ord == Greater,
        CmpOp::Ge => ord != Less,
        CmpOp::Eq => ord == Equal,
        CmpOp::Ne => ord != Equal,
    }
}

fn memo_match(cached: &[Value], args: &[Value], tol: f64) -> bool {
    cached.len() == args.len()
        && cached
            .iter()
            .zip(args)
            .all(|(a, b)| (a.as_f64_lossy() - b.as_f64_lossy()).abs() <= tol)
}
