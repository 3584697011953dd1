//! ApproxSafe mapping: probe each block with a mild approximation and prune
//! the ones that do not help, blow the error bound, or crash.

use crate::lang::Program;
use crate::transform::{apply_technique, ApproxTechnique, Block, BlockKind};

use super::validator::{Evaluation, ValidatorContext};

pub const PROBE_SAMPLING: u32 = 2;
pub const PROBE_MEMO_CAPACITY: u32 = 16;

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub block: Block,
    pub technique: ApproxTechnique,
    pub retained: bool,
    pub reason: String,
    pub e_m: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub safe: Vec<Block>,
    pub outcomes: Vec<ProbeOutcome>,
}

/// Probe every block individually and keep those that strictly reduce the
/// checkpoint ratio, stay within the error bound, and never crash.
pub fn probe_safety(
    p: &Program,
    blocks: &[Block],
    ctx: &ValidatorContext,
    error_bound: f64,
) -> ProbeReport {
    let mut outcomes = Vec::with_capacity(blocks.len());
    for block in blocks {
        let technique = probe_technique(block, ctx);
        let outcome = match technique {
            None => ProbeOutcome {
                block: block.clone(),
                technique: ApproxTechnique::Memoization {
                    tolerance: 0.0,
                    capacity: 1,
                },
                retained: false,
                reason: "function is not memoizable".to_string(),
                e_m: None,
                c: None,
            },
            Some(technique) => probe_block(p, block, technique, ctx, error_bound),
        };
        outcomes.push(outcome);
    }
    let safe = outcomes
        .iter()
        .filter(|o| o.retained)
        .map(|o| o.block.clone())
        .collect();
    ProbeReport { safe, outcomes }
}

fn probe_technique(block: &Block, ctx: &ValidatorContext) -> Option<ApproxTechnique> {
    match block.kind {
        // sampling applies to every loop shape and matches the first rung
        // of the sweep's sampling ladder
        BlockKind::CountedLoop | BlockKind::GeneralLoop => Some(ApproxTechnique::Sampling {
            factor: PROBE_SAMPLING,
        }),
        BlockKind::Function => {
            if !block.memoizable {
                return None;
            }
            // tolerance: 1% of the argument spread observed on the baseline
            let tolerance = match ctx.arg_range(&block.function) {
                Some((lo, hi)) if hi > lo => (hi - lo) * 0.01,
                _ => 0.0,
            };
            Some(ApproxTechnique::Memoization {
                tolerance,
                capacity: PROBE_MEMO_CAPACITY,
            })
        }
    }
}

fn probe_block(
    p: &Program,
    block: &Block,
    technique: ApproxTechnique,
    ctx: &ValidatorContext,
    error_bound: f64,
) -> ProbeOutcome {
    let candidate = match apply_technique(p, block, &technique) {
        Ok(c) => c,
        Err(e) => {
            return ProbeOutcome {
                block: block.clone(),
                technique,
                retained: false,
                reason: format!("probe transform failed: {e}"),
                e_m: None,
                c: None,
            }
        }
    };
    match ctx.evaluate(&candidate) {
        Evaluation::Crashed { reason } => ProbeOutcome {
            block: block.clone(),
            technique,
            retained: false,
            reason: format!("crash: {reason}"),
            e_m: None,
            c: None,
        },
        Evaluation::Ok { report, .. } => {
            // +inf and NaN ratios also count as "no gain"
            let (retained, reason) = if report.c.is_nan() || report.c >= 1.0 {
                (
                    false,
                    format!("checkpoint ratio {:.4} not below 1", report.c),
                )
            } else if report.e_m > error_bound {
                (
                    false,
                    format!("error {:.4} exceeds bound {:.4}", report.e_m, error_bound),
                )
            } else {
                (true, "retained".to_string())
            };
            ProbeOutcome {
                block: block.clone(),
                technique,
                retained,
                reason,
                e_m: Some(report.e_m),
                c: Some(report.c),
            }
        }
    }
}
