//! Report artifacts: `sweep.csv`, `selection.json`, `report.md`, and
//! per-capacitor event logs. Re-running with identical inputs reproduces
//! byte-identical files (no timestamps, shortest-round-trip float text).

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::energy::{write_event_log_csv, SimEvent};
use crate::metrics::ErrorMode;
use crate::search::{ProbeOutcome, RecordStatus, SweepRecord};

use super::PipelineError;

#[derive(Debug, Clone, Serialize)]
pub struct SelectionSummary {
    pub loop_technique: String,
    pub loop_param: f64,
    pub memo_tolerance: f64,
    pub memo_capacity: u32,
    pub intensity_step: u32,
    pub e_m: f64,
    pub c: f64,
    pub objective: f64,
    pub error_mode: String,
    pub baseline_checkpoints: u64,
    pub selected_checkpoints: u64,
    pub reduction_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapReport {
    pub cap_uf: f64,
    pub viable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub baseline_checkpoints: u64,
    pub baseline_total_cycles: u64,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionSummary>,
    #[serde(skip)]
    pub records: Vec<SweepRecord>,
    #[serde(skip)]
    pub probe_outcomes: Vec<ProbeOutcome>,
    #[serde(skip)]
    pub selected_events: Vec<SimEvent>,
    /// (trace name, baseline checkpoints, selected checkpoints) on the
    /// remaining configured traces.
    #[serde(skip)]
    pub cross_trace: Vec<(String, u64, u64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub source: String,
    pub error_class: String,
    pub error_bound: f64,
    pub seed: u64,
    pub platform: String,
    pub primary_trace: String,
    pub cases: usize,
    pub ground_truth_mode: bool,
    pub caps: Vec<CapReport>,
}

impl RunReport {
    pub fn any_feasible(&self) -> bool {
        self.caps.iter().any(|c| c.feasible)
    }

    pub fn any_viable(&self) -> bool {
        self.caps.iter().any(|c| c.viable)
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// `sweep.csv`: one row per evaluated point, all capacitors in one table.
pub fn sweep_csv(report: &RunReport) -> String {
    let mut out = String::from("cap_uf,l,m,l_p,f_p,e_m,c,objective,status\n");
    for cap in &report.caps {
        for r in &cap.records {
            let _ = writeln!(
                out,
                "{},{},memoization,{},{},{},{},{},{}",
                fmt_f(cap.cap_uf),
                r.loop_kind.name(),
                fmt_f(r.loop_technique.intensity()),
                fmt_f(r.memo_technique.intensity()),
                fmt_f(r.e_m),
                fmt_f(r.c),
                fmt_f(r.objective),
                r.status.name(),
            );
        }
    }
    out
}

#[derive(Serialize)]
struct SelectionFile<'a> {
    source: &'a str,
    error_class: &'a str,
    error_bound: f64,
    seed: u64,
    selections: Vec<SelectionEntry<'a>>,
}

#[derive(Serialize)]
struct SelectionEntry<'a> {
    cap_uf: f64,
    viable: bool,
    feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    selection: Option<&'a SelectionSummary>,
}

pub fn selection_json(report: &RunReport) -> String {
    let file = SelectionFile {
        source: &report.source,
        error_class: &report.error_class,
        error_bound: report.error_bound,
        seed: report.seed,
        selections: report
            .caps
            .iter()
            .map(|c| SelectionEntry {
                cap_uf: c.cap_uf,
                viable: c.viable,
                feasible: c.feasible,
                selection: c.selection.as_ref(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("selection serializes");
    s.push('\n');
    s
}

pub fn report_md(report: &RunReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Approxify report: {}", report.source);
    let _ = writeln!(md);
    let _ = writeln!(md, "- error class: {}", report.error_class);
    let _ = writeln!(md, "- error bound: {}", fmt_f(report.error_bound));
    let _ = writeln!(md, "- platform: {}", report.platform);
    let _ = writeln!(md, "- primary trace: {}", report.primary_trace);
    let _ = writeln!(md, "- input cases: {}", report.cases);
    let _ = writeln!(
        md,
        "- error mode: {}",
        if report.ground_truth_mode {
            "ground-truth"
        } else {
            "direct"
        }
    );
    let _ = writeln!(md, "- seed: {}", report.seed);
    let _ = writeln!(md);

    let _ = writeln!(md, "## Baselines and selections");
    let _ = writeln!(md);
    let _ = writeln!(
        md,
        "| cap (uF) | baseline checkpoints | selected technique | l_p | f_p | e_m | c | reduction % |"
    );
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
    for cap in &report.caps {
        if !cap.viable {
            let _ = writeln!(
                md,
                "| {} | - | non-viable ({}) | - | - | - | - | - |",
                fmt_f(cap.cap_uf),
                cap.failure.as_deref().unwrap_or("baseline failed"),
            );
            continue;
        }
        match &cap.selection {
            Some(sel) => {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} | {} | {:.4} |",
                    fmt_f(cap.cap_uf),
                    cap.baseline_checkpoints,
                    sel.loop_technique,
                    fmt_f(sel.loop_param),
                    fmt_f(sel.memo_tolerance),
                    fmt_f(sel.e_m),
                    fmt_f(sel.c),
                    sel.reduction_pct,
                );
            }
            None => {
                let _ = writeln!(
                    md,
                    "| {} | {} | no feasible point | - | - | - | - | - |",
                    fmt_f(cap.cap_uf),
                    cap.baseline_checkpoints,
                );
            }
        }
    }
    let _ = writeln!(md);

    if let Some(cap) = report.caps.iter().find(|c| c.viable) {
        let _ = writeln!(md, "## Safety probe ({} uF)", fmt_f(cap.cap_uf));
        let _ = writeln!(md);
        let _ = writeln!(md, "| block | kind | function | path | verdict |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        for o in &cap.probe_outcomes {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} |",
                o.block.id,
                o.block.kind.name(),
                o.block.function,
                o.block.path,
                o.reason,
            );
        }
        let _ = writeln!(md);
    }

    if report.caps.iter().any(|c| !c.cross_trace.is_empty()) {
        let _ = writeln!(md, "## Checkpoints across traces (baseline / selected)");
        let _ = writeln!(md);
        let _ = writeln!(md, "| trace | cap (uF) | baseline | selected |");
        let _ = writeln!(md, "|---|---|---|---|");
        for cap in &report.caps {
            for (name, base, sel) in &cap.cross_trace {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} |",
                    name,
                    fmt_f(cap.cap_uf),
                    base,
                    sel
                );
            }
        }
        let _ = writeln!(md);
    }

    md
}

/// Write all artifacts under `out_dir`.
pub fn emit_files(report: &RunReport, out_dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::Io {
        message: format!("cannot create `{}`: {e}", out_dir.display()),
    })?;
    let write = |name: &str, contents: &str| -> Result<(), PipelineError> {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| PipelineError::Io {
            message: format!("cannot write `{}`: {e}", path.display()),
        })
    };
    write("sweep.csv", &sweep_csv(report))?;
    write("selection.json", &selection_json(report))?;
    write("report.md", &report_md(report))?;
    for cap in &report.caps {
        if !cap.selected_events.is_empty() {
            let name = format!("events_{}.csv", cap.cap_uf.round() as u64);
            write(&name, &write_event_log_csv(&cap.selected_events))?;
        }
    }
    Ok(())
}

pub fn mode_name(mode: Option<ErrorMode>) -> &'static str {
    match mode {
        Some(m) => m.name(),
        None => "direct",
    }
}

pub fn record_is_ok(r: &SweepRecord) -> bool {
    r.status == RecordStatus::Ok
}
