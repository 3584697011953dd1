//! Intensity sweep over the approximation search space: for every loop
//! technique paired with memoization, climb both intensity ladders in
//! lockstep until the measured error leaves the bound (the violating point is
//! recorded), a crash ends the ladder, or a schedule is exhausted.

use crate::lang::Program;
use crate::metrics::ErrorMode;
use crate::transform::{apply_config, ApproxConfig, ApproxTechnique, Block, BlockKind};

use super::validator::{Evaluation, ValidatorContext};

/// Arithmetic float ladder `start, start+step, ..` capped at `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloatSchedule {
    pub start: f64,
    pub step: f64,
    pub max: f64,
}

impl FloatSchedule {
    pub fn at(&self, i: u32) -> Option<f64> {
        let v = self.start + self.step * i as f64;
        if v <= self.max + 1e-9 {
            Some(v)
        } else {
            None
        }
    }
}

/// Arithmetic integer ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntSchedule {
    pub start: u32,
    pub step: u32,
    pub max: u32,
}

impl IntSchedule {
    pub fn at(&self, i: u32) -> Option<u32> {
        let v = self.start + self.step * i;
        if v <= self.max {
            Some(v)
        } else {
            None
        }
    }
}

/// Geometric float ladder `start, start*factor, ..` capped at `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomSchedule {
    pub start: f64,
    pub factor: f64,
    pub max: f64,
}

impl GeomSchedule {
    pub fn at(&self, i: u32) -> Option<f64> {
        let v = self.start * self.factor.powi(i as i32);
        if v <= self.max * (1.0 + 1e-9) {
            Some(v)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub error_bound: f64,
    pub truncation: FloatSchedule,
    pub random: FloatSchedule,
    pub sampling: IntSchedule,
    pub memo_tolerance: GeomSchedule,
    pub memo_capacity: u32,
    pub watchdog_multiplier: f64,
    pub seed: u64,
}

impl SweepSettings {
    pub fn new(error_bound: f64, seed: u64) -> Self {
        SweepSettings {
            error_bound,
            truncation: FloatSchedule {
                start: 0.05,
                step: 0.05,
                max: 0.95,
            },
            random: FloatSchedule {
                start: 0.05,
                step: 0.05,
                max: 0.95,
            },
            sampling: IntSchedule {
                start: 2,
                step: 1,
                max: 10,
            },
            memo_tolerance: GeomSchedule {
                start: 0.01,
                factor: 2.0,
                max: 10.24,
            },
            memo_capacity: 16,
            watchdog_multiplier: 10.0,
            seed,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.error_bound > 0.0 && self.error_bound <= 1.0) {
            return Err(format!(
                "error bound must be in (0,1], got {}",
                self.error_bound
            ));
        }
        if self.truncation.step <= 0.0 || self.random.step <= 0.0 {
            return Err("float schedules must increase".to_string());
        }
        if self.sampling.step == 0 {
            return Err("sampling schedule must increase".to_string());
        }
        if self.memo_tolerance.factor <= 1.0 {
            return Err("memo tolerance schedule must increase".to_string());
        }
        if self.watchdog_multiplier < 1.0 {
            return Err("watchdog multiplier must be >= 1".to_string());
        }
        Ok(())
    }
}

/// The loop-perforation axis of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    Truncation,
    Sampling,
    Random,
}

impl LoopKind {
    pub fn all() -> [LoopKind; 3] {
        [LoopKind::Truncation, LoopKind::Sampling, LoopKind::Random]
    }

    pub fn name(self) -> &'static str {
        match self {
            LoopKind::Truncation => "truncation",
            LoopKind::Sampling => "sampling",
            LoopKind::Random => "random",
        }
    }

    fn rank(self) -> u8 {
        match self {
            LoopKind::Truncation => 0,
            LoopKind::Sampling => 1,
            LoopKind::Random => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    Ok,
    Crashed,
}

impl RecordStatus {
    pub fn name(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Crashed => "crashed",
        }
    }
}

/// One evaluated point `D<l, m, l_p, f_p>`.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub loop_kind: LoopKind,
    /// Loop technique with its intensity parameter `l_p`.
    pub loop_technique: ApproxTechnique,
    /// Memoization with its tolerance `f_p`.
    pub memo_technique: ApproxTechnique,
    /// Shared schedule position (the intensity axis).
    pub step: u32,
    pub e_m: f64,
    pub c: f64,
    pub objective: f64,
    pub checkpoints: u64,
    pub total_cycles: u64,
    pub status: RecordStatus,
    pub mode: Option<ErrorMode>,
    pub crash_reason: Option<String>,
}

impl SweepRecord {
    pub fn feasible(&self, error_bound: f64) -> bool {
        self.status == RecordStatus::Ok && self.e_m <= error_bound && self.c.is_finite()
    }

    /// Smaller intensity step first, technique order as the final stabilizer.
    pub fn tie_break_rank(&self) -> (u32, u8) {
        (self.step, self.loop_kind.rank())
    }
}

/// Algorithm-1-style sweep. Returns the record table `D`; empty when there
/// are no safe blocks to approximate.
pub fn sweep(
    original: &Program,
    safe: &[Block],
    loop_techniques: &[LoopKind],
    settings: &SweepSettings,
    ctx: &ValidatorContext,
) -> Vec<SweepRecord> {
    let safe_loops: Vec<&Block> = safe
        .iter()
        .filter(|b| b.kind != BlockKind::Function)
        .collect();
    let safe_functions: Vec<&Block> = safe
        .iter()
        .filter(|b| b.kind == BlockKind::Function)
        .collect();
    if safe_loops.is_empty() && safe_functions.is_empty() {
        return Vec::new();
    }

    let mut records = Vec::new();
    for &kind in loop_techniques {
        let mut step = 0u32;
        let mut e_t = 0.0f64;
        while e_t < settings.error_bound {
            let Some(loop_technique) = loop_param(kind, settings, step) else {
                break;
            };
            let Some(tolerance) = settings.memo_tolerance.at(step) else {
                break;
            };
            let memo_technique = ApproxTechnique::Memoization {
                tolerance,
                capacity: settings.memo_capacity,
            };
            let config = ApproxConfig {
                loop_technique,
                memo_technique,
                seed: settings.seed,
            };
            let candidate = match apply_config(original, &safe_loops, &safe_functions, &config) {
                Ok(c) => c,
                Err(e) => {
                    records.push(SweepRecord {
                        loop_kind: kind,
                        loop_technique,
                        memo_technique,
                        step,
                        e_m: f64::NAN,
                        c: f64::NAN,
                        objective: f64::NAN,
                        checkpoints: 0,
                        total_cycles: 0,
                        status: RecordStatus::Crashed,
                        mode: None,
                        crash_reason: Some(format!("transform failed: {e}")),
                    });
                    break;
                }
            };
            match ctx.evaluate(&candidate) {
                Evaluation::Ok {
                    report,
                    checkpoints,
                    total_cycles,
                } => {
                    e_t = report.e_m;
                    records.push(SweepRecord {
                        loop_kind: kind,
                        loop_technique,
                        memo_technique,
                        step,
                        e_m: report.e_m,
                        c: report.c,
                        objective: report.e_m + report.c,
                        checkpoints,
                        total_cycles,
                        status: RecordStatus::Ok,
                        mode: Some(report.mode),
                        crash_reason: None,
                    });
                }
                Evaluation::Crashed { reason } => {
                    records.push(SweepRecord {
                        loop_kind: kind,
                        loop_technique,
                        memo_technique,
                        step,
                        e_m: f64::NAN,
                        c: f64::NAN,
                        objective: f64::NAN,
                        checkpoints: 0,
                        total_cycles: 0,
                        status: RecordStatus::Crashed,
                        mode: None,
                        crash_reason: Some(reason),
                    });
                    break;
                }
            }
            step += 1;
        }
    }
    records
}

fn loop_param(kind: LoopKind, settings: &SweepSettings, step: u32) -> Option<ApproxTechnique> {
    Some(match kind {
        LoopKind::Truncation => ApproxTechnique::Truncation {
            factor: settings.truncation.at(step)?,
        },
        LoopKind::Sampling => ApproxTechnique::Sampling {
            factor: settings.sampling.at(step)?,
        },
        LoopKind::Random => ApproxTechnique::Random {
            threshold: settings.random.at(step)?,
            seed: settings.seed,
        },
    })
}
