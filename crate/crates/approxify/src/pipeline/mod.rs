//! End-to-end driver: parse, enumerate, baseline, probe, sweep, select,
//! report — per configured capacitor size.

pub mod config;
pub mod corpus;
pub mod report;

pub use config::{load_manifest, parse_numbers_csv, parse_pgm, write_pgm, RunConfig};
pub use report::{CapReport, RunReport, SelectionSummary};

use std::path::Path;

use thiserror::Error;

use crate::energy::{load_trace, simulate_compiled, CapacitorSpec, EnergyTrace, SimOptions};
use crate::interp::{compile, InputCase, Machine, PlatformModel};
use crate::lang::{parse_source, LangError, Program};
use crate::search::{
    probe_safety, select_best, sweep, SweepRecord, SweepSettings, ValidatorContext,
};
use crate::transform::{apply_config, enumerate_blocks, ApproxConfig, Block, BlockKind};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {message}")]
    Config { message: String },
    #[error("io error: {message}")]
    Io { message: String },
    #[error("source error: {error}")]
    Source { error: LangError },
    #[error("program failed on its inputs: {message}")]
    SourceRun { message: String },
    #[error("no viable capacitor: {detail}")]
    NoViableCapacitor { detail: String },
    #[error("no sweep point satisfies the error bound on any capacitor")]
    NoFeasiblePoint,
}

impl PipelineError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } | PipelineError::Io { .. } => 2,
            PipelineError::Source { .. } | PipelineError::SourceRun { .. } => 3,
            PipelineError::NoViableCapacitor { .. } => 4,
            PipelineError::NoFeasiblePoint => 5,
        }
    }
}

/// Run the whole pipeline for a loaded config. Report files are written to
/// the configured output directory (resolved against `base`); the returned
/// report mirrors their contents. `NoFeasiblePoint` still writes the files.
pub fn run_pipeline(cfg: &RunConfig, base: &Path) -> Result<RunReport, PipelineError> {
    let platform = cfg.platform_model(base)?;
    let source_path = base.join(&cfg.source);
    let source_text = std::fs::read_to_string(&source_path).map_err(|e| PipelineError::Config {
        message: format!("cannot read source `{}`: {e}", source_path.display()),
    })?;
    let program = parse_source(&source_text).map_err(|error| PipelineError::Source { error })?;
    let cases = load_manifest(base.join(&cfg.inputs))?;

    let mut traces = Vec::new();
    for p in cfg.trace.paths() {
        let full = base.join(p);
        let trace = load_trace(&full)
            .map_err(|e| PipelineError::Config {
                message: format!("trace `{}`: {e}", full.display()),
            })?
            .with_repeat(cfg.trace_repeat);
        traces.push((p.to_string(), trace));
    }

    let settings = cfg.sweep_settings();
    settings
        .check()
        .map_err(|message| PipelineError::Config { message })?;
    let loop_kinds = cfg.loop_kinds()?;
    let error_class = cfg.error_class_parsed();

    // the program must at least run continuously on its inputs
    precheck_continuous(&program, &cases, &platform, cfg.seed)?;

    let blocks = enumerate_blocks(&program);
    let report = build_report(
        cfg,
        &program,
        &blocks,
        &cases,
        &platform,
        &traces,
        &settings,
        &loop_kinds,
        error_class,
    )?;

    if !report.any_viable() {
        return Err(PipelineError::NoViableCapacitor {
            detail: format!(
                "none of {:?} uF completed the baseline on trace `{}`",
                cfg.capacitors_uf, report.primary_trace
            ),
        });
    }

    let out_dir = base.join(&cfg.output_dir);
    report::emit_files(&report, &out_dir)?;

    if !report.any_feasible() {
        return Err(PipelineError::NoFeasiblePoint);
    }
    Ok(report)
}

fn precheck_continuous(
    program: &Program,
    cases: &[InputCase],
    platform: &PlatformModel,
    seed: u64,
) -> Result<(), PipelineError> {
    let compiled = compile(program);
    for case in cases {
        let mut m = Machine::new(&compiled, case, platform, seed);
        m.set_watchdog(Some(1_000_000_000));
        m.run_to_end().map_err(|f| PipelineError::SourceRun {
            message: format!("case `{}`: {f}", case.id),
        })?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    cfg: &RunConfig,
    program: &Program,
    blocks: &[Block],
    cases: &[InputCase],
    platform: &PlatformModel,
    traces: &[(String, EnergyTrace)],
    settings: &SweepSettings,
    loop_kinds: &[crate::search::LoopKind],
    error_class: crate::metrics::ErrorClass,
) -> Result<RunReport, PipelineError> {
    let (primary_name, primary_trace) = &traces[0];
    let mut caps = Vec::new();
    let mut ground_truth_mode = false;

    for &cap_uf in &cfg.capacitors_uf {
        let spec = capacitor_spec(cfg, cap_uf, platform)?;
        let ctx = match ValidatorContext::new(
            program,
            cases,
            platform,
            &spec,
            primary_trace,
            error_class,
            cfg.seed,
            settings.watchdog_multiplier,
            cfg.max_sim_ms,
        ) {
            Ok(ctx) => ctx,
            Err(e) => {
                caps.push(CapReport {
                    cap_uf,
                    viable: false,
                    failure: Some(e.to_string()),
                    baseline_checkpoints: 0,
                    baseline_total_cycles: 0,
                    feasible: false,
                    selection: None,
                    records: Vec::new(),
                    probe_outcomes: Vec::new(),
                    selected_events: Vec::new(),
                    cross_trace: Vec::new(),
                });
                continue;
            }
        };
        ground_truth_mode = ctx.has_ground_truth();

        let probe = probe_safety(program, blocks, &ctx, cfg.error_bound);
        let records = sweep(program, &probe.safe, loop_kinds, settings, &ctx);
        let selected = select_best(&records, cfg.error_bound).ok().cloned();

        let (selection, selected_events, cross_trace) = match &selected {
            None => (None, Vec::new(), Vec::new()),
            Some(rec) => {
                let summary = SelectionSummary {
                    loop_technique: rec.loop_kind.name().to_string(),
                    loop_param: rec.loop_technique.intensity(),
                    memo_tolerance: rec.memo_technique.intensity(),
                    memo_capacity: settings.memo_capacity,
                    intensity_step: rec.step,
                    e_m: rec.e_m,
                    c: rec.c,
                    objective: rec.objective,
                    error_mode: report::mode_name(rec.mode).to_string(),
                    baseline_checkpoints: ctx.baseline_checkpoints(),
                    selected_checkpoints: rec.checkpoints,
                    reduction_pct: (1.0 - rec.c) * 100.0,
                };
                let (events, cross) = selected_run_artifacts(
                    program,
                    &probe.safe,
                    rec,
                    cfg,
                    cases,
                    platform,
                    &spec,
                    traces,
                    &ctx,
                )?;
                (Some(summary), events, cross)
            }
        };

        caps.push(CapReport {
            cap_uf,
            viable: true,
            failure: None,
            baseline_checkpoints: ctx.baseline_checkpoints(),
            baseline_total_cycles: ctx.baseline_total_cycles(),
            feasible: selection.is_some(),
            selection,
            records,
            probe_outcomes: probe.outcomes,
            selected_events,
            cross_trace,
        });
    }

    Ok(RunReport {
        source: cfg.source.clone(),
        error_class: cfg.error_class.clone(),
        error_bound: cfg.error_bound,
        seed: cfg.seed,
        platform: platform.name.clone(),
        primary_trace: primary_name.clone(),
        cases: cases.len(),
        ground_truth_mode,
        caps,
    })
}

fn capacitor_spec(
    cfg: &RunConfig,
    cap_uf: f64,
    platform: &PlatformModel,
) -> Result<CapacitorSpec, PipelineError> {
    let mut spec = CapacitorSpec::from_uf(cap_uf, platform);
    let o = &cfg.capacitor;
    if let Some(v) = o.v_on {
        spec.v_on = v;
    }
    if let Some(v) = o.v_off {
        spec.v_off = v;
    }
    if let Some(v) = o.source_resistance_ohm {
        spec.source_resistance_ohm = v;
    }
    if let Some(v) = o.harvest_while_on {
        spec.harvest_while_on = v;
    }
    spec.v_chk = o.v_chk.unwrap_or_else(|| spec.default_v_chk(platform));
    spec.check().map_err(|e| PipelineError::Config {
        message: e.to_string(),
    })?;
    Ok(spec)
}

/// (trace name, baseline checkpoints, selected checkpoints) rows.
type CrossTraceCounts = Vec<(String, u64, u64)>;

/// Re-run the selected configuration: event log on the first input case of
/// the primary trace, and checkpoint counts across the remaining traces.
#[allow(clippy::too_many_arguments)]
fn selected_run_artifacts(
    program: &Program,
    safe: &[Block],
    rec: &SweepRecord,
    cfg: &RunConfig,
    cases: &[InputCase],
    platform: &PlatformModel,
    spec: &CapacitorSpec,
    traces: &[(String, EnergyTrace)],
    ctx: &ValidatorContext,
) -> Result<(Vec<crate::energy::SimEvent>, CrossTraceCounts), PipelineError> {
    let safe_loops: Vec<&Block> = safe
        .iter()
        .filter(|b| b.kind != BlockKind::Function)
        .collect();
    let safe_fns: Vec<&Block> = safe
        .iter()
        .filter(|b| b.kind == BlockKind::Function)
        .collect();
    let approx_config = ApproxConfig {
        loop_technique: rec.loop_technique,
        memo_technique: rec.memo_technique,
        seed: cfg.seed,
    };
    let candidate = apply_config(program, &safe_loops, &safe_fns, &approx_config)
        .expect("selected configuration re-applies");
    let compiled_candidate = compile(&candidate);
    let compiled_original = compile(program);
    let opts = SimOptions {
        seed: cfg.seed,
        watchdog_cycles: Some(ctx.watchdog_budget()),
        max_sim_ms: cfg.max_sim_ms,
    };

    let events = simulate_compiled(
        &compiled_candidate,
        &cases[0],
        platform,
        spec,
        &traces[0].1,
        &opts,
    )
    .map(|r| r.event_log)
    .unwrap_or_default();

    let mut cross = Vec::new();
    for (name, trace) in &traces[1..] {
        let mut base_count = 0u64;
        let mut sel_count = 0u64;
        let mut ok = true;
        for case in cases {
            let b = simulate_compiled(&compiled_original, case, platform, spec, trace, &opts);
            let s = simulate_compiled(&compiled_candidate, case, platform, spec, trace, &opts);
            match (b, s) {
                (Ok(b), Ok(s)) => {
                    base_count += b.checkpoints;
                    sel_count += s.checkpoints;
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            cross.push((name.clone(), base_count, sel_count));
        }
    }
    Ok((events, cross))
}
