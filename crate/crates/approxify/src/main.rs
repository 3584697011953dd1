//! Command-line driver for the approxify pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use approxify::energy::{
    load_trace, simulate_intermittent, write_event_log_csv, CapacitorSpec, SimOptions,
};
use approxify::interp::{InputCase, PlatformModel};
use approxify::lang::{parse_source, pretty_print};
use approxify::pipeline::{self, corpus, load_manifest, PipelineError, RunConfig};
use approxify::transform::{apply_technique, enumerate_blocks, ApproxTechnique, Block};

#[derive(Parser)]
#[command(
    name = "approxify",
    version,
    about = "Energy-accuracy autotuner for intermittently powered programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the approximable blocks of a source file.
    Sites { source: PathBuf },
    /// Apply one approximation to one block and print the rewritten source.
    Transform {
        source: PathBuf,
        /// truncation | sampling | random | memo
        #[arg(long)]
        technique: String,
        /// Intensity: factor, stride, threshold, or tolerance.
        #[arg(long)]
        param: f64,
        /// Block id from `approxify sites`.
        #[arg(long)]
        block: u32,
        /// Memoization cache capacity.
        #[arg(long, default_value_t = 16)]
        capacity: u32,
        /// Seed recorded for random perforation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate one intermittent run and print its summary.
    Simulate {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        cap_uf: f64,
        #[arg(long, default_value = "cortex-m")]
        platform: String,
        /// Input manifest; the first case is used unless --case is given.
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long)]
        case: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Play the trace once instead of looping it.
        #[arg(long)]
        no_repeat: bool,
        /// Write the event log CSV here.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Write the embedded benchmark corpus to a directory.
    Corpus {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::Run { config } => run(&config),
        Command::Sites { source } => sites(&source),
        Command::Transform {
            source,
            technique,
            param,
            block,
            capacity,
            seed,
            output,
        } => transform(
            &source,
            &technique,
            param,
            block,
            capacity,
            seed,
            output.as_deref(),
        ),
        Command::Simulate {
            source,
            trace,
            cap_uf,
            platform,
            inputs,
            case,
            seed,
            no_repeat,
            events,
        } => simulate(
            &source,
            &trace,
            cap_uf,
            &platform,
            inputs.as_deref(),
            case.as_deref(),
            seed,
            no_repeat,
            events.as_deref(),
        ),
        Command::Corpus { out_dir } => {
            corpus::materialize(&out_dir)?;
            println!("corpus written to {}", out_dir.display());
            Ok(())
        }
    }
}

fn run(config_path: &Path) -> Result<(), PipelineError> {
    let (config, base) = RunConfig::load(config_path)?;
    let report = pipeline::run_pipeline(&config, &base)?;
    let out_dir = base.join(&config.output_dir);
    for cap in &report.caps {
        match &cap.selection {
            Some(sel) => println!(
                "{} uF: baseline {} checkpoints -> {} with {} {} (e_m {:.4}, c {:.4}, reduction {:.2}%)",
                cap.cap_uf,
                sel.baseline_checkpoints,
                sel.selected_checkpoints,
                sel.loop_technique,
                sel.loop_param,
                sel.e_m,
                sel.c,
                sel.reduction_pct,
            ),
            None if cap.viable => println!(
                "{} uF: baseline {} checkpoints, no feasible point",
                cap.cap_uf, cap.baseline_checkpoints
            ),
            None => println!(
                "{} uF: non-viable ({})",
                cap.cap_uf,
                cap.failure.as_deref().unwrap_or("baseline failed")
            ),
        }
    }
    println!("report written to {}", out_dir.display());
    Ok(())
}

fn load_program(path: &Path) -> Result<approxify::lang::Program, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config {
        message: format!("cannot read source `{}`: {e}", path.display()),
    })?;
    parse_source(&text).map_err(|error| PipelineError::Source { error })
}

fn sites(source: &Path) -> Result<(), PipelineError> {
    let program = load_program(source)?;
    let blocks = enumerate_blocks(&program);
    println!(
        "{:<4} {:<13} {:<16} {:<10} memoizable",
        "id", "kind", "function", "path"
    );
    for b in &blocks {
        println!(
            "{:<4} {:<13} {:<16} {:<10} {}",
            b.id,
            b.kind.name(),
            b.function,
            b.path.to_string(),
            if b.memoizable { "yes" } else { "no" }
        );
    }
    Ok(())
}

fn transform(
    source: &Path,
    technique: &str,
    param: f64,
    block_id: u32,
    capacity: u32,
    seed: u64,
    output: Option<&Path>,
) -> Result<(), PipelineError> {
    let program = load_program(source)?;
    let blocks = enumerate_blocks(&program);
    let block: &Block =
        blocks
            .iter()
            .find(|b| b.id == block_id)
            .ok_or_else(|| PipelineError::Config {
                message: format!("no block with id {block_id}; run `approxify sites`"),
            })?;
    let technique = match technique {
        "truncation" => ApproxTechnique::Truncation { factor: param },
        "sampling" => ApproxTechnique::Sampling {
            factor: param as u32,
        },
        "random" => ApproxTechnique::Random {
            threshold: param,
            seed,
        },
        "memo" | "memoization" => ApproxTechnique::Memoization {
            tolerance: param,
            capacity,
        },
        other => {
            return Err(PipelineError::Config {
                message: format!(
                    "unknown technique `{other}` (truncation, sampling, random, memo)"
                ),
            })
        }
    };
    let rewritten =
        apply_technique(&program, block, &technique).map_err(|e| PipelineError::Config {
            message: e.to_string(),
        })?;
    let text = pretty_print(&rewritten);
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| PipelineError::Io {
            message: format!("cannot write `{}`: {e}", path.display()),
        })?,
        None => print!("{text}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    source: &Path,
    trace_path: &Path,
    cap_uf: f64,
    platform_name: &str,
    inputs: Option<&Path>,
    case_id: Option<&str>,
    seed: u64,
    no_repeat: bool,
    events: Option<&Path>,
) -> Result<(), PipelineError> {
    let program = load_program(source)?;
    let platform = PlatformModel::preset(platform_name).map_err(|e| PipelineError::Config {
        message: e.to_string(),
    })?;
    let trace = load_trace(trace_path)
        .map_err(|e| PipelineError::Config {
            message: format!("trace `{}`: {e}", trace_path.display()),
        })?
        .with_repeat(!no_repeat);
    let input =
        match inputs {
            None => InputCase::default(),
            Some(path) => {
                let cases = load_manifest(path)?;
                match case_id {
                    None => cases.into_iter().next().expect("manifest has cases"),
                    Some(id) => cases.into_iter().find(|c| c.id == id).ok_or_else(|| {
                        PipelineError::Config {
                            message: format!("no case `{id}` in manifest"),
                        }
                    })?,
                }
            }
        };
    let cap = CapacitorSpec::from_uf(cap_uf, &platform);
    let opts = SimOptions {
        seed,
        watchdog_cycles: Some(1_000_000_000),
        ..Default::default()
    };
    let result =
        simulate_intermittent(&program, &input, &platform, &cap, &trace, &opts).map_err(|e| {
            PipelineError::SourceRun {
                message: e.to_string(),
            }
        })?;
    println!("completed:      {}", result.completed);
    println!("sim time:       {} ms", result.sim_time_ms);
    println!("logical cycles: {}", result.logical_cycles);
    println!("total cycles:   {}", result.total_cycles);
    println!("checkpoints:    {}", result.checkpoints);
    println!("reboots:        {}", result.reboots);
    if let Some(path) = events {
        std::fs::write(path, write_event_log_csv(&result.event_log)).map_err(|e| {
            PipelineError::Io {
                message: format!("cannot write `{}`: {e}", path.display()),
            }
        })?;
    }
    Ok(())
}
