//! End-to-end pipeline tests against the materialized corpus, including
//! CLI exit codes and byte-stable report artifacts.

use std::path::Path;
use std::process::Command;

use approxify::pipeline::{corpus, run_pipeline, PipelineError, RunConfig};

fn materialized() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    corpus::materialize(dir.path()).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing artifact {name}: {e}"))
}

#[test]
fn susan_pipeline_emits_all_artifacts() {
    let dir = materialized();
    let (config, base) = RunConfig::load(dir.path().join("susan/susan_config.json")).unwrap();
    let report = run_pipeline(&config, &base).unwrap();
    assert_eq!(report.caps.len(), 4);
    assert!(report.any_feasible());

    let out = dir.path().join("susan/out");
    let sweep = read(&out, "sweep.csv");
    assert!(sweep.starts_with("cap_uf,l,m,l_p,f_p,e_m,c,objective,status\n"));
    assert!(sweep.lines().count() > 10);
    let selection = read(&out, "selection.json");
    assert!(selection.contains("\"cap_uf\": 220.0"));
    let md = read(&out, "report.md");
    assert!(md.contains("## Baselines and selections"));
    // one event log per feasible capacitor: 4 caps, 1 sweep table
    let event_files: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().to_string())
        .filter(|n| n.starts_with("events_"))
        .collect();
    assert_eq!(event_files.len(), 4, "{event_files:?}");
    assert_eq!(sweep.matches("cap_uf").count(), 1);
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let dir_a = materialized();
    let dir_b = materialized();
    for d in [&dir_a, &dir_b] {
        let (config, base) = RunConfig::load(d.path().join("lqi/lqi_config.json")).unwrap();
        run_pipeline(&config, &base).unwrap();
    }
    for name in ["sweep.csv", "selection.json", "report.md", "events_220.csv"] {
        let a = read(&dir_a.path().join("lqi/out"), name);
        let b = read(&dir_b.path().join("lqi/out"), name);
        assert_eq!(a, b, "artifact {name} differs between reruns");
    }
}

#[test]
fn report_reduction_consistent_with_ratio() {
    let dir = materialized();
    let (config, base) = RunConfig::load(dir.path().join("susan/susan_config.json")).unwrap();
    let report = run_pipeline(&config, &base).unwrap();
    for cap in &report.caps {
        if let Some(sel) = &cap.selection {
            let expect = (1.0 - sel.c) * 100.0;
            assert!(
                (sel.reduction_pct - expect).abs() < 1e-4,
                "reduction {} vs (1-c)*100 = {expect}",
                sel.reduction_pct
            );
            assert_eq!(sel.baseline_checkpoints, cap.baseline_checkpoints);
        }
    }
}

#[test]
fn missing_trace_file_is_config_error_naming_path() {
    let dir = materialized();
    let config_path = dir.path().join("susan/susan_config.json");
    let text = std::fs::read_to_string(&config_path).unwrap();
    let text = text.replace("../traces/constant5v.csv", "../traces/nonexistent.csv");
    std::fs::write(&config_path, text).unwrap();
    let (config, base) = RunConfig::load(&config_path).unwrap();
    let err = run_pipeline(&config, &base).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("nonexistent.csv"), "{err}");
}

#[test]
fn infeasible_bound_still_emits_baseline_report() {
    let dir = materialized();
    let config_path = dir.path().join("strsearch/strsearch_config.json");
    let text = std::fs::read_to_string(&config_path).unwrap();
    let text = text.replace("\"error_bound\": 0.5", "\"error_bound\": 0.0001");
    std::fs::write(&config_path, text).unwrap();
    let (config, base) = RunConfig::load(&config_path).unwrap();
    let err = run_pipeline(&config, &base).unwrap_err();
    assert!(matches!(err, PipelineError::NoFeasiblePoint));
    assert_eq!(err.exit_code(), 5);
    let md = read(&dir.path().join("strsearch/out"), "report.md");
    assert!(md.contains("no feasible point"));
    assert!(md.contains("| 47 |"), "baseline data present:\n{md}");
}

#[test]
fn env_seed_overrides_config() {
    let dir = materialized();
    let config_path = dir.path().join("susan/susan_config.json");
    // private env mutation: this test must not run concurrently with other
    // APPROXIFY_SEED users, so it is self-contained here
    std::env::set_var("APPROXIFY_SEED", "777");
    let loaded = RunConfig::load(&config_path);
    std::env::remove_var("APPROXIFY_SEED");
    let (config, _) = loaded.unwrap();
    assert_eq!(config.seed, 777);
}

#[test]
fn parse_error_maps_to_exit_3() {
    let dir = materialized();
    let source_path = dir.path().join("susan/susan.axc");
    std::fs::write(&source_path, "func main() { emit_num(undeclared); }").unwrap();
    let (config, base) = RunConfig::load(dir.path().join("susan/susan_config.json")).unwrap();
    let err = run_pipeline(&config, &base).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

// ---- CLI binary behaviour ----

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_approxify"))
}

#[test]
fn cli_sites_lists_blocks() {
    let dir = materialized();
    let out = bin()
        .arg("sites")
        .arg(dir.path().join("susan/susan.axc"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("counted-loop"), "{text}");
    assert_eq!(text.lines().count(), 7, "header + 6 loops:\n{text}");
}

#[test]
fn cli_transform_emits_reparsable_source() {
    let dir = materialized();
    let out = bin()
        .arg("transform")
        .arg(dir.path().join("strsearch/strsearch.axc"))
        .args([
            "--technique",
            "truncation",
            "--param",
            "0.25",
            "--block",
            "1",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("trunc_keep"), "{text}");
    approxify::lang::parse_source(&text).expect("emitted source parses");
}

#[test]
fn cli_simulate_prints_summary_and_writes_events() {
    let dir = materialized();
    let events = dir.path().join("events.csv");
    let out = bin()
        .arg("simulate")
        .args(["--source"])
        .arg(dir.path().join("strsearch/strsearch.axc"))
        .args(["--trace"])
        .arg(dir.path().join("traces/constant5v.csv"))
        .args(["--cap-uf", "47", "--platform", "cortex-m"])
        .args(["--inputs"])
        .arg(dir.path().join("strsearch/strsearch_inputs.json"))
        .args(["--events"])
        .arg(&events)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("checkpoints:"), "{text}");
    let log = std::fs::read_to_string(&events).unwrap();
    assert!(log.starts_with("time_ms,volts,event\n"));
    assert!(log.contains("complete"));
}

#[test]
fn cli_run_exit_codes() {
    let dir = materialized();
    // config error: missing config file
    let out = bin()
        .args(["run", "--config", "/nonexistent/cfg.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // success path on the smallest corpus benchmark
    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("strsearch/strsearch_config.json"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn cli_corpus_materializes_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["corpus", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("susan/susan.axc").exists());
    assert!(dir.path().join("traces/bursty.csv").exists());
}
