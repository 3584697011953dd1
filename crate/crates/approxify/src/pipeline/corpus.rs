//! Shipped benchmark corpus: three ApproxC programs with input manifests,
//! run configs, and synthetic energy traces. Everything is embedded so the
//! corpus can be materialized anywhere with `approxify corpus --out-dir`.

use std::path::Path;

use crate::energy::{parse_trace_csv, EnergyTrace};
use crate::interp::InputCase;
use crate::lang::{parse_source, Program};

use super::config::{parse_numbers_csv, parse_pgm};
use super::PipelineError;

pub struct CorpusFile {
    pub path: &'static str,
    pub contents: &'static str,
}

macro_rules! corpus_file {
    ($path:literal) => {
        CorpusFile {
            path: $path,
            contents: include_str!(concat!("../../corpus/", $path)),
        }
    };
}

pub const FILES: &[CorpusFile] = &[
    corpus_file!("susan/susan.axc"),
    corpus_file!("susan/susan_inputs.json"),
    corpus_file!("susan/susan_config.json"),
    corpus_file!("susan/img0.pgm"),
    corpus_file!("susan/img1.pgm"),
    corpus_file!("lqi/lqi.axc"),
    corpus_file!("lqi/lqi_inputs.json"),
    corpus_file!("lqi/lqi_config.json"),
    corpus_file!("lqi/link_a.csv"),
    corpus_file!("lqi/link_b.csv"),
    corpus_file!("lqi/link_c.csv"),
    corpus_file!("strsearch/strsearch.axc"),
    corpus_file!("strsearch/strsearch_inputs.json"),
    corpus_file!("strsearch/strsearch_config.json"),
    corpus_file!("strsearch/case_aba.csv"),
    corpus_file!("strsearch/case_the.csv"),
    corpus_file!("traces/constant5v.csv"),
    corpus_file!("traces/square.csv"),
    corpus_file!("traces/noisy.csv"),
    corpus_file!("traces/ramp.csv"),
    corpus_file!("traces/bursty.csv"),
];

pub const BENCHMARK_NAMES: [&str; 3] = ["susan", "lqi", "strsearch"];
pub const TRACE_NAMES: [&str; 5] = ["constant5v", "square", "noisy", "ramp", "bursty"];

fn file(path: &str) -> &'static str {
    FILES
        .iter()
        .find(|f| f.path == path)
        .unwrap_or_else(|| panic!("no corpus file `{path}`"))
        .contents
}

/// One shipped benchmark, loaded in-process.
pub struct Benchmark {
    pub name: &'static str,
    pub program: Program,
    pub cases: Vec<InputCase>,
    pub config_path: &'static str,
}

/// Load a benchmark from the embedded corpus.
pub fn load_benchmark(name: &str) -> Benchmark {
    let (source, config_path, cases) = match name {
        "susan" => {
            let cases = vec![image_case("diag", file("susan/img0.pgm"))];
            (file("susan/susan.axc"), "susan/susan_config.json", cases)
        }
        "lqi" => {
            let cases = vec![
                numbers_case("link_a", file("lqi/link_a.csv")),
                numbers_case("link_b", file("lqi/link_b.csv")),
                numbers_case("link_c", file("lqi/link_c.csv")),
            ];
            (file("lqi/lqi.axc"), "lqi/lqi_config.json", cases)
        }
        "strsearch" => {
            let cases = vec![
                numbers_case("aba", file("strsearch/case_aba.csv")),
                numbers_case("the", file("strsearch/case_the.csv")),
            ];
            (
                file("strsearch/strsearch.axc"),
                "strsearch/strsearch_config.json",
                cases,
            )
        }
        other => panic!("unknown benchmark `{other}`"),
    };
    let program = parse_source(source).expect("corpus benchmark parses");
    Benchmark {
        name: BENCHMARK_NAMES.iter().find(|n| **n == name).unwrap(),
        program,
        cases,
        config_path,
    }
}

pub fn load_trace_by_name(name: &str) -> EnergyTrace {
    let path = format!("traces/{name}.csv");
    parse_trace_csv(file(&path))
        .expect("corpus trace parses")
        .with_repeat(true)
}

fn image_case(id: &str, pgm: &str) -> InputCase {
    InputCase {
        id: id.to_string(),
        image: Some(parse_pgm(pgm).expect("corpus image parses")),
        ..Default::default()
    }
}

fn numbers_case(id: &str, csv: &str) -> InputCase {
    InputCase {
        id: id.to_string(),
        numbers: parse_numbers_csv(csv).expect("corpus csv parses"),
        ..Default::default()
    }
}

/// Write the whole corpus tree under `dir`.
pub fn materialize(dir: &Path) -> Result<(), PipelineError> {
    for f in FILES {
        let path = dir.join(f.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| PipelineError::Io {
                message: format!("cannot create `{}`: {e}", parent.display()),
            })?;
        }
        std::fs::write(&path, f.contents).map_err(|e| PipelineError::Io {
            message: format!("cannot write `{}`: {e}", path.display()),
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_continuous, InputCase, PlatformModel, ProgramOutput};

    fn run_bench(name: &str, case_idx: usize) -> ProgramOutput {
        let b = load_benchmark(name);
        run_continuous(
            &b.program,
            &b.cases[case_idx],
            &PlatformModel::cortex_m(),
            100_000_000,
            42,
        )
        .unwrap()
        .0
    }

    #[test]
    fn all_benchmarks_parse_and_run() {
        for name in BENCHMARK_NAMES {
            let b = load_benchmark(name);
            assert!(!b.cases.is_empty());
            for i in 0..b.cases.len() {
                let _ = run_bench(name, i);
            }
        }
    }

    #[test]
    fn all_traces_parse() {
        for name in TRACE_NAMES {
            let t = load_trace_by_name(name);
            assert!(
                t.max_volts() > 3.3,
                "trace {name} must be able to boot the device"
            );
        }
    }

    #[test]
    fn lqi_all_delivered_gives_ratio_one() {
        let b = load_benchmark("lqi");
        let n = 1000;
        let mut numbers = Vec::with_capacity(n * 2);
        for i in 0..n {
            numbers.push(i as f64 * 10.0);
            numbers.push(1.0);
        }
        let case = InputCase::numeric("all", numbers);
        let out = run_continuous(
            &b.program,
            &case,
            &PlatformModel::cortex_m(),
            100_000_000,
            1,
        )
        .unwrap()
        .0;
        match out {
            ProgramOutput::Numeric(v) => {
                assert!((v[0] - 1.0).abs() < 1e-12, "ratio {} should be 1.0", v[0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lqi_alternating_matches_hand_weighted_mean() {
        let b = load_benchmark("lqi");
        let n = 1000usize;
        let mut numbers = Vec::with_capacity(n * 2);
        for i in 0..n {
            numbers.push(i as f64 * 10.0);
            numbers.push(if i % 2 == 0 { 1.0 } else { 0.0 });
        }
        let case = InputCase::numeric("alt", numbers);
        let out = run_continuous(
            &b.program,
            &case,
            &PlatformModel::cortex_m(),
            100_000_000,
            1,
        )
        .unwrap()
        .0;
        // independent weighted-mean oracle: w_i = (i+1)/n, delivered on even i
        let mut wsum = 0.0;
        let mut dsum = 0.0;
        for i in 0..n {
            let w = (i + 1) as f64 / n as f64;
            wsum += w;
            if i % 2 == 0 {
                dsum += w;
            }
        }
        let expect = dsum / wsum;
        // spreadsheet check: sum of odd weights 1..999 over sum 1..1000
        assert!((expect - 250_000.0 / 500_500.0).abs() < 1e-12);
        match out {
            ProgramOutput::Numeric(v) => {
                assert!((v[0] - expect).abs() < 1e-12, "got {} want {expect}", v[0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strsearch_counts_overlapping_matches() {
        let b = load_benchmark("strsearch");
        // "aba" in "ababa" -> 2 (overlapping)
        let mut numbers: Vec<f64> = "aba".chars().map(|c| c as u32 as f64).collect();
        numbers.push(-1.0);
        numbers.extend("ababa".chars().map(|c| c as u32 as f64));
        let case = InputCase::numeric("tiny", numbers);
        let out = run_continuous(
            &b.program,
            &case,
            &PlatformModel::cortex_m(),
            100_000_000,
            1,
        )
        .unwrap()
        .0;
        match out {
            ProgramOutput::Numeric(v) => assert_eq!(v[0], 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strsearch_corpus_counts_match_oracle() {
        let b = load_benchmark("strsearch");
        for case in &b.cases {
            // decode pattern and text from the input encoding
            let sep = case.numbers.iter().position(|v| *v < 0.0).unwrap();
            let pattern: String = case.numbers[..sep]
                .iter()
                .map(|v| char::from_u32(*v as u32).unwrap())
                .collect();
            let text: String = case.numbers[sep + 1..]
                .iter()
                .map(|v| char::from_u32(*v as u32).unwrap())
                .collect();
            // sliding-window oracle
            let tchars: Vec<char> = text.chars().collect();
            let pchars: Vec<char> = pattern.chars().collect();
            let mut expect = 0.0;
            for i in 0..=(tchars.len() - pchars.len()) {
                if tchars[i..i + pchars.len()] == pchars[..] {
                    expect += 1.0;
                }
            }
            let out = run_continuous(&b.program, case, &PlatformModel::cortex_m(), 100_000_000, 1)
                .unwrap()
                .0;
            match out {
                ProgramOutput::Numeric(v) => {
                    assert_eq!(v[0], expect, "case {}", case.id);
                    assert!(expect >= 2.0, "corpus text should contain matches");
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn susan_emits_edges() {
        let out = run_bench("susan", 0);
        match out {
            ProgramOutput::Image(img) => {
                assert_eq!((img.rows, img.cols), (16, 16));
                let max = img.pixels.iter().cloned().fold(0.0, f64::max);
                assert!(max > 100.0, "edge response should light up, max {max}");
                let lit = img.pixels.iter().filter(|p| **p > 50.0).count();
                assert!(lit > 10 && lit < 200, "edges should be sparse, lit {lit}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn susan_handles_the_square_test_image() {
        let b = load_benchmark("susan");
        let case = InputCase {
            id: "square".to_string(),
            image: Some(crate::pipeline::parse_pgm(super::file("susan/img1.pgm")).unwrap()),
            ..Default::default()
        };
        let out = run_continuous(&b.program, &case, &PlatformModel::cortex_m(), 100_000_000, 1)
            .unwrap()
            .0;
        match out {
            ProgramOutput::Image(img) => {
                let lit = img.pixels.iter().filter(|p| **p > 50.0).count();
                assert!(lit > 8, "square edges should register, lit {lit}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
