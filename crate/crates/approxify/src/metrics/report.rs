//! The error metric and checkpoint reduction ratio the validator reports.

use crate::interp::ProgramOutput;

use super::distance::{distance, ErrorClass};
use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// Errors of both programs measured against a supplied ground truth;
    /// the metric compares their average errors relative to each other.
    GroundTruth,
    /// No ground truth: the metric is the mean distance between the
    /// approximated outputs and the original outputs.
    Direct,
}

impl ErrorMode {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMode::GroundTruth => "ground-truth",
            ErrorMode::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub mode: ErrorMode,
    /// Mean normalized error of the original program (ground-truth mode only).
    pub e_o: Option<f64>,
    /// Mean normalized error of the approximated program.
    pub e_a: f64,
    /// The error metric used to bound approximation aggressiveness.
    pub e_m: f64,
    /// Ground-truth mode hit `e_o = 0` and fell back to direct mode.
    pub degenerate_reference: bool,
    /// Checkpoint reduction ratio; filled in by the validator.
    pub c: f64,
}

/// Compare aligned output sequences. With ground truth present,
/// `e_m = |e_o - e_a| / e_o`; a perfect original (`e_o = 0`) falls back to
/// direct mode and is flagged. Without ground truth, `e_m` is the mean
/// normalized distance of approximated vs original outputs.
pub fn error_metric(
    original: &[ProgramOutput],
    approximated: &[ProgramOutput],
    cls: ErrorClass,
    ground_truth: Option<&[ProgramOutput]>,
) -> Result<ErrorReport, MetricError> {
    if original.len() != approximated.len() || original.is_empty() {
        return Err(MetricError::CaseMismatch {
            original: original.len(),
            approximated: approximated.len(),
        });
    }
    if let Some(truth) = ground_truth {
        if truth.len() != original.len() {
            return Err(MetricError::CaseMismatch {
                original: original.len(),
                approximated: truth.len(),
            });
        }
        let e_o = mean_distance(cls, original, truth)?;
        let e_a = mean_distance(cls, approximated, truth)?;
        if e_o > 0.0 {
            return Ok(ErrorReport {
                mode: ErrorMode::GroundTruth,
                e_o: Some(e_o),
                e_a,
                e_m: (e_o - e_a).abs() / e_o,
                degenerate_reference: false,
                c: f64::NAN,
            });
        }
        // fall through to direct mode with the degenerate flag
        let e_m = mean_distance(cls, approximated, original)?;
        return Ok(ErrorReport {
            mode: ErrorMode::Direct,
            e_o: Some(0.0),
            e_a: e_m,
            e_m,
            degenerate_reference: true,
            c: f64::NAN,
        });
    }
    let e_m = mean_distance(cls, approximated, original)?;
    Ok(ErrorReport {
        mode: ErrorMode::Direct,
        e_o: None,
        e_a: e_m,
        e_m,
        degenerate_reference: false,
        c: f64::NAN,
    })
}

fn mean_distance(
    cls: ErrorClass,
    outputs: &[ProgramOutput],
    reference: &[ProgramOutput],
) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    for (o, r) in outputs.iter().zip(reference) {
        sum += distance(cls, o, r)?.normalized;
    }
    Ok(sum / outputs.len() as f64)
}

/// Eq-2-style checkpoint reduction ratio `c = c_a / c_o`. A checkpoint-free
/// baseline cannot be improved: `c_o = 0` yields 1 when `c_a = 0`, else
/// infinity.
pub fn checkpoint_ratio(c_o: u64, c_a: u64) -> f64 {
    if c_o == 0 {
        if c_a == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        c_a as f64 / c_o as f64
    }
}
