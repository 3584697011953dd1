//! Deterministic interpreter with per-operation cycle accounting,
//! snapshot/restore of execution state, and fault trapping.

pub mod compile;
mod machine;
mod platform;
mod rng;

pub use compile::{compile, CompiledProgram, CostKind};
pub use machine::{
    ArgRange, Checkpoint, ExecState, Machine, StepInfo, Trigger, Value, MAX_CALL_DEPTH,
};
pub use platform::{CycleCosts, PlatformError, PlatformModel};
pub use rng::XorShift64;

use crate::lang::{NodePath, Program};
use thiserror::Error;

/// Runtime failures; the safety mapper treats all of these as "crash".
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Fault {
    #[error("out-of-bounds access in `{function}` at {path}")]
    OutOfBounds { function: String, path: NodePath },
    #[error("division by zero in `{function}` at {path}")]
    DivisionByZero { function: String, path: NodePath },
    #[error("call stack exceeded {MAX_CALL_DEPTH} frames")]
    StackOverflow,
    #[error("watchdog exceeded: more than {budget} cycles executed")]
    WatchdogExceeded { budget: u64 },
}

/// Dense grayscale grid; pixel values are conventionally 0..=255.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl ImageGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        ImageGrid {
            rows,
            cols,
            pixels: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.pixels[r * self.cols + c] = v;
    }
}

/// One test input a program runs against.
#[derive(Debug, Clone, Default)]
pub struct InputCase {
    pub id: String,
    pub numbers: Vec<f64>,
    pub image: Option<ImageGrid>,
    pub text: Option<String>,
    pub ground_truth: Option<ProgramOutput>,
}

impl InputCase {
    pub fn numeric(id: &str, numbers: Vec<f64>) -> Self {
        InputCase {
            id: id.to_string(),
            numbers,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProgramOutput {
    Numeric(Vec<f64>),
    Text(Vec<String>),
    Image(ImageGrid),
}

impl ProgramOutput {
    /// Bit-exact equality (distinguishes -0.0/0.0 and NaN payloads).
    pub fn bits_eq(&self, other: &ProgramOutput) -> bool {
        fn veq(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        match (self, other) {
            (ProgramOutput::Numeric(a), ProgramOutput::Numeric(b)) => veq(a, b),
            (ProgramOutput::Text(a), ProgramOutput::Text(b)) => a == b,
            (ProgramOutput::Image(a), ProgramOutput::Image(b)) => {
                a.rows == b.rows && a.cols == b.cols && veq(&a.pixels, &b.pixels)
            }
            _ => false,
        }
    }
}

/// Run a program start to finish on one input, trapping runaway executions.
///
/// Returns the program output and the executed cycle count.
pub fn run_continuous(
    p: &Program,
    input: &InputCase,
    plat: &PlatformModel,
    cycle_budget: u64,
    seed: u64,
) -> Result<(ProgramOutput, u64), Fault> {
    let compiled = compile(p);
    run_compiled(&compiled, input, plat, cycle_budget, seed)
}

pub fn run_compiled(
    compiled: &CompiledProgram,
    input: &InputCase,
    plat: &PlatformModel,
    cycle_budget: u64,
    seed: u64,
) -> Result<(ProgramOutput, u64), Fault> {
    let mut m = Machine::new(compiled, input, plat, seed);
    m.set_watchdog(Some(cycle_budget));
    m.run_to_end()?;
    Ok((m.output(), m.cycles()))
}
