//! Output Validator: runs a candidate program over the input cases on the
//! configured capacitor/trace pair and reports (e_m, c) against the baseline.

use std::collections::BTreeMap;

use crate::energy::{simulate_compiled, CapacitorSpec, EnergyTrace, SimError, SimOptions};
use crate::interp::{compile, InputCase, Machine, PlatformModel, ProgramOutput};
use crate::lang::Program;
use crate::metrics::{checkpoint_ratio, error_metric, ErrorClass, ErrorReport};

use super::SearchError;

pub struct ValidatorContext<'a> {
    pub cases: &'a [InputCase],
    pub platform: &'a PlatformModel,
    pub capacitor: &'a CapacitorSpec,
    pub trace: &'a EnergyTrace,
    pub error_class: ErrorClass,
    pub seed: u64,
    pub max_sim_ms: u64,
    baseline_outputs: Vec<ProgramOutput>,
    baseline_checkpoints: u64,
    baseline_total_cycles: u64,
    baseline_logical_cycles: u64,
    ground_truth: Option<Vec<ProgramOutput>>,
    arg_ranges: BTreeMap<String, (f64, f64)>,
    watchdog_budget: u64,
}

/// Outcome of validating one candidate.
#[derive(Debug, Clone)]
pub enum Evaluation {
    Ok {
        report: ErrorReport,
        checkpoints: u64,
        total_cycles: u64,
    },
    /// Any fault, watchdog trip, non-progressive run, or incomparable
    /// output counts as a crash for search purposes.
    Crashed { reason: String },
}

impl<'a> ValidatorContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        original: &Program,
        cases: &'a [InputCase],
        platform: &'a PlatformModel,
        capacitor: &'a CapacitorSpec,
        trace: &'a EnergyTrace,
        error_class: ErrorClass,
        seed: u64,
        watchdog_multiplier: f64,
        max_sim_ms: u64,
    ) -> Result<Self, SearchError> {
        if cases.is_empty() {
            return Err(SearchError::Baseline {
                detail: "no input cases".to_string(),
            });
        }
        let compiled = compile(original);

        // continuous baseline: outputs, logical cycles, argument ranges
        let mut baseline_outputs = Vec::with_capacity(cases.len());
        let mut baseline_logical_cycles = 0u64;
        let mut arg_ranges: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for case in cases {
            let mut m = Machine::new(&compiled, case, platform, seed);
            m.set_watchdog(Some(1_000_000_000));
            m.record_arg_ranges();
            m.run_to_end().map_err(|f| SearchError::Baseline {
                detail: format!("baseline run failed on case `{}`: {f}", case.id),
            })?;
            baseline_logical_cycles = baseline_logical_cycles.max(m.cycles());
            for (fi, range) in m.arg_ranges() {
                let name = compiled.functions[*fi as usize].name.clone();
                let e = arg_ranges.entry(name).or_insert((range.min, range.max));
                e.0 = e.0.min(range.min);
                e.1 = e.1.max(range.max);
            }
            baseline_outputs.push(m.output());
        }

        let watchdog_budget =
            ((baseline_logical_cycles as f64 * watchdog_multiplier) as u64).max(100_000);

        // intermittent baseline: checkpoint counts
        let opts = SimOptions {
            seed,
            watchdog_cycles: Some(watchdog_budget),
            max_sim_ms,
        };
        let mut baseline_checkpoints = 0u64;
        let mut baseline_total_cycles = 0u64;
        for case in cases {
            let res = simulate_compiled(&compiled, case, platform, capacitor, trace, &opts)
                .map_err(|e| baseline_sim_error(&case.id, e))?;
            baseline_checkpoints += res.checkpoints;
            baseline_total_cycles += res.total_cycles;
        }

        let ground_truth = if cases.iter().all(|c| c.ground_truth.is_some()) {
            Some(
                cases
                    .iter()
                    .map(|c| c.ground_truth.clone().unwrap())
                    .collect(),
            )
        } else {
            None
        };

        Ok(ValidatorContext {
            cases,
            platform,
            capacitor,
            trace,
            error_class,
            seed,
            max_sim_ms,
            baseline_outputs,
            baseline_checkpoints,
            baseline_total_cycles,
            baseline_logical_cycles,
            ground_truth,
            arg_ranges,
            watchdog_budget,
        })
    }

    pub fn baseline_checkpoints(&self) -> u64 {
        self.baseline_checkpoints
    }

    pub fn baseline_total_cycles(&self) -> u64 {
        self.baseline_total_cycles
    }

    pub fn baseline_logical_cycles(&self) -> u64 {
        self.baseline_logical_cycles
    }

    pub fn baseline_outputs(&self) -> &[ProgramOutput] {
        &self.baseline_outputs
    }

    pub fn has_ground_truth(&self) -> bool {
        self.ground_truth.is_some()
    }

    /// Observed numeric argument spread of a function during the baseline.
    pub fn arg_range(&self, function: &str) -> Option<(f64, f64)> {
        self.arg_ranges.get(function).copied()
    }

    pub fn watchdog_budget(&self) -> u64 {
        self.watchdog_budget
    }

    pub fn evaluate(&self, candidate: &Program) -> Evaluation {
        let compiled = compile(candidate);
        let opts = SimOptions {
            seed: self.seed,
            watchdog_cycles: Some(self.watchdog_budget),
            max_sim_ms: self.max_sim_ms,
        };
        let mut outputs = Vec::with_capacity(self.cases.len());
        let mut checkpoints = 0u64;
        let mut total_cycles = 0u64;
        for case in self.cases {
            match simulate_compiled(
                &compiled,
                case,
                self.platform,
                self.capacitor,
                self.trace,
                &opts,
            ) {
                Ok(res) => {
                    checkpoints += res.checkpoints;
                    total_cycles += res.total_cycles;
                    outputs.push(res.output.expect("completed runs carry output"));
                }
                Err(e) => {
                    return Evaluation::Crashed {
                        reason: format!("case `{}`: {e}", case.id),
                    }
                }
            }
        }
        let mut report = match error_metric(
            &self.baseline_outputs,
            &outputs,
            self.error_class,
            self.ground_truth.as_deref(),
        ) {
            Ok(r) => r,
            Err(e) => {
                return Evaluation::Crashed {
                    reason: format!("outputs incomparable: {e}"),
                }
            }
        };
        report.c = checkpoint_ratio(self.baseline_checkpoints, checkpoints);
        Evaluation::Ok {
            report,
            checkpoints,
            total_cycles,
        }
    }
}

fn baseline_sim_error(case: &str, e: SimError) -> SearchError {
    SearchError::Baseline {
        detail: format!("baseline simulation failed on case `{case}`: {e}"),
    }
}
