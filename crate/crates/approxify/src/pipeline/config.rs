//! Run configuration and input-manifest loading.
//!
//! The config is JSON; file references resolve relative to the config file.
//! Input manifests list cases referencing grayscale ASCII PGM (P2) images,
//! comma-separated numeric CSVs (flattened row-major), and UTF-8 text files,
//! with an optional per-case ground truth in the same formats.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::interp::{ImageGrid, InputCase, PlatformModel, ProgramOutput};
use crate::metrics::ErrorClass;
use crate::search::{FloatSchedule, GeomSchedule, IntSchedule, LoopKind, SweepSettings};

use super::PipelineError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlatformRef {
    Preset(String),
    Inline(PlatformModel),
}

impl Default for PlatformRef {
    fn default() -> Self {
        PlatformRef::Preset("cortex-m".to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceRef {
    One(String),
    Many(Vec<String>),
}

impl TraceRef {
    pub fn paths(&self) -> Vec<&str> {
        match self {
            TraceRef::One(p) => vec![p.as_str()],
            TraceRef::Many(ps) => ps.iter().map(|p| p.as_str()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CapacitorOverrides {
    pub v_on: Option<f64>,
    pub v_off: Option<f64>,
    pub v_chk: Option<f64>,
    pub source_resistance_ohm: Option<f64>,
    pub harvest_while_on: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct SweepOverrides {
    pub truncation: Option<FloatScheduleDef>,
    pub random: Option<FloatScheduleDef>,
    pub sampling: Option<IntScheduleDef>,
    pub memo_tolerance: Option<GeomScheduleDef>,
    pub memo_capacity: Option<u32>,
    pub watchdog_multiplier: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FloatScheduleDef {
    pub start: f64,
    pub step: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntScheduleDef {
    pub start: u32,
    pub step: u32,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeomScheduleDef {
    pub start: f64,
    pub factor: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: String,
    pub inputs: String,
    pub error_class: String,
    pub error_bound: f64,
    #[serde(default)]
    pub platform: PlatformRef,
    pub capacitors_uf: Vec<f64>,
    pub trace: TraceRef,
    #[serde(default = "default_true")]
    pub trace_repeat: bool,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: String,
    #[serde(default)]
    pub capacitor: CapacitorOverrides,
    #[serde(default)]
    pub sweep: SweepOverrides,
    #[serde(default)]
    pub loop_techniques: Option<Vec<String>>,
    #[serde(default = "default_max_sim_ms")]
    pub max_sim_ms: u64,
}

fn default_true() -> bool {
    true
}

fn default_max_sim_ms() -> u64 {
    10_000_000
}

impl RunConfig {
    /// Parse a config file; `APPROXIFY_SEED` overrides the config seed.
    pub fn load(path: impl AsRef<Path>) -> Result<(RunConfig, PathBuf), PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config {
            message: format!("cannot read config `{}`: {e}", path.display()),
        })?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config {
                message: format!("config `{}` is invalid: {e}", path.display()),
            })?;
        if let Ok(seed) = std::env::var("APPROXIFY_SEED") {
            config.seed = seed.parse().map_err(|_| PipelineError::Config {
                message: format!("APPROXIFY_SEED is not an integer: `{seed}`"),
            })?;
        }
        config.validate()?;
        let base = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        Ok((config, base))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.error_bound > 0.0 && self.error_bound <= 1.0) {
            return Err(PipelineError::Config {
                message: format!("error_bound must be in (0,1], got {}", self.error_bound),
            });
        }
        if self.capacitors_uf.is_empty() {
            return Err(PipelineError::Config {
                message: "capacitors_uf must be nonempty".to_string(),
            });
        }
        if self
            .capacitors_uf
            .iter()
            .any(|c| !(c.is_finite() && *c > 0.0))
        {
            return Err(PipelineError::Config {
                message: "capacitor sizes must be positive".to_string(),
            });
        }
        if ErrorClass::parse(&self.error_class).is_none() {
            return Err(PipelineError::Config {
                message: format!(
                    "unknown error_class `{}` (expected one of euclidean, manhattan, rmse, \
                     wer, levenshtein, f1, pixel-error-rate, ssim)",
                    self.error_class
                ),
            });
        }
        if self.trace.paths().is_empty() {
            return Err(PipelineError::Config {
                message: "trace list is empty".to_string(),
            });
        }
        Ok(())
    }

    pub fn error_class_parsed(&self) -> ErrorClass {
        ErrorClass::parse(&self.error_class).expect("validated error class")
    }

    pub fn platform_model(&self, base: &Path) -> Result<PlatformModel, PipelineError> {
        match &self.platform {
            PlatformRef::Inline(m) => {
                m.check().map_err(|e| PipelineError::Config {
                    message: e.to_string(),
                })?;
                Ok(m.clone())
            }
            PlatformRef::Preset(name) => {
                if let Ok(m) = PlatformModel::preset(name) {
                    return Ok(m);
                }
                // not a preset: treat as a JSON file path
                let path = base.join(name);
                let text = std::fs::read_to_string(&path).map_err(|_| PipelineError::Config {
                    message: format!(
                        "platform `{name}` is neither a preset (cortex-m, msp430) nor a \
                             readable JSON file"
                    ),
                })?;
                PlatformModel::from_json(&text).map_err(|e| PipelineError::Config {
                    message: e.to_string(),
                })
            }
        }
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        let mut s = SweepSettings::new(self.error_bound, self.seed);
        if let Some(t) = self.sweep.truncation {
            s.truncation = FloatSchedule {
                start: t.start,
                step: t.step,
                max: t.max,
            };
        }
        if let Some(t) = self.sweep.random {
            s.random = FloatSchedule {
                start: t.start,
                step: t.step,
                max: t.max,
            };
        }
        if let Some(t) = self.sweep.sampling {
            s.sampling = IntSchedule {
                start: t.start,
                step: t.step,
                max: t.max,
            };
        }
        if let Some(t) = self.sweep.memo_tolerance {
            s.memo_tolerance = GeomSchedule {
                start: t.start,
                factor: t.factor,
                max: t.max,
            };
        }
        if let Some(c) = self.sweep.memo_capacity {
            s.memo_capacity = c;
        }
        if let Some(w) = self.sweep.watchdog_multiplier {
            s.watchdog_multiplier = w;
        }
        s
    }

    pub fn loop_kinds(&self) -> Result<Vec<LoopKind>, PipelineError> {
        match &self.loop_techniques {
            None => Ok(LoopKind::all().to_vec()),
            Some(names) => names
                .iter()
                .map(|n| match n.as_str() {
                    "truncation" => Ok(LoopKind::Truncation),
                    "sampling" => Ok(LoopKind::Sampling),
                    "random" => Ok(LoopKind::Random),
                    other => Err(PipelineError::Config {
                        message: format!("unknown loop technique `{other}`"),
                    }),
                })
                .collect(),
        }
    }
}

// ---- input manifests ----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub cases: Vec<ManifestCase>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCase {
    pub id: String,
    #[serde(default)]
    pub numbers: Option<String>,
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub ground_truth: Option<GroundTruthRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct GroundTruthRef {
    pub numbers: Option<String>,
    pub image: Option<String>,
    pub text: Option<String>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<InputCase>, PipelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config {
        message: format!("cannot read input manifest `{}`: {e}", path.display()),
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Config {
        message: format!("manifest `{}` is invalid: {e}", path.display()),
    })?;
    if manifest.cases.is_empty() {
        return Err(PipelineError::Config {
            message: format!("manifest `{}` lists no cases", path.display()),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.cases.iter().map(|c| load_case(c, base)).collect()
}

fn load_case(case: &ManifestCase, base: &Path) -> Result<InputCase, PipelineError> {
    let numbers = match &case.numbers {
        Some(p) => load_numbers_csv(&base.join(p))?,
        None => Vec::new(),
    };
    let image = match &case.image {
        Some(p) => Some(load_pgm(&base.join(p))?),
        None => None,
    };
    let text = match &case.text {
        Some(p) => {
            Some(
                std::fs::read_to_string(base.join(p)).map_err(|e| PipelineError::Config {
                    message: format!("cannot read text `{p}`: {e}"),
                })?,
            )
        }
        None => None,
    };
    let ground_truth = match &case.ground_truth {
        None => None,
        Some(gt) => Some(load_ground_truth(gt, base)?),
    };
    Ok(InputCase {
        id: case.id.clone(),
        numbers,
        image,
        text,
        ground_truth,
    })
}

fn load_ground_truth(gt: &GroundTruthRef, base: &Path) -> Result<ProgramOutput, PipelineError> {
    match (&gt.numbers, &gt.image, &gt.text) {
        (Some(p), None, None) => Ok(ProgramOutput::Numeric(load_numbers_csv(&base.join(p))?)),
        (None, Some(p), None) => Ok(ProgramOutput::Image(load_pgm(&base.join(p))?)),
        (None, None, Some(p)) => {
            let text =
                std::fs::read_to_string(base.join(p)).map_err(|e| PipelineError::Config {
                    message: format!("cannot read ground truth `{p}`: {e}"),
                })?;
            Ok(ProgramOutput::Text(
                text.split_whitespace().map(str::to_string).collect(),
            ))
        }
        _ => Err(PipelineError::Config {
            message: "ground_truth needs exactly one of numbers/image/text".to_string(),
        }),
    }
}

/// Numeric CSV: comma-separated values flattened row-major; `#` comments.
pub fn load_numbers_csv(path: &Path) -> Result<Vec<f64>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config {
        message: format!("cannot read numbers `{}`: {e}", path.display()),
    })?;
    parse_numbers_csv(&text).map_err(|message| PipelineError::Config {
        message: format!("{}: {message}", path.display()),
    })
}

pub fn parse_numbers_csv(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for field in line.split(',') {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| format!("line {}: invalid number `{field}`", i + 1))?;
            out.push(v);
        }
    }
    Ok(out)
}

/// ASCII PGM (P2) with `#` comments.
pub fn load_pgm(path: &Path) -> Result<ImageGrid, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config {
        message: format!("cannot read image `{}`: {e}", path.display()),
    })?;
    parse_pgm(&text).map_err(|message| PipelineError::Config {
        message: format!("{}: {message}", path.display()),
    })
}

pub fn parse_pgm(text: &str) -> Result<ImageGrid, String> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>());
    let magic = tokens.next().ok_or("empty PGM")?;
    if magic != "P2" {
        return Err(format!("expected P2 magic, found `{magic}`"));
    }
    let mut dim = |what: &str| -> Result<usize, String> {
        tokens
            .next()
            .ok_or(format!("missing {what}"))?
            .parse::<usize>()
            .map_err(|_| format!("invalid {what}"))
    };
    let cols = dim("width")?;
    let rows = dim("height")?;
    let maxval = dim("maxval")?;
    if maxval == 0 || maxval > 65_535 {
        return Err(format!("bad maxval {maxval}"));
    }
    let mut pixels = Vec::with_capacity(rows * cols);
    for t in tokens {
        let v: f64 = t.parse().map_err(|_| format!("invalid pixel `{t}`"))?;
        pixels.push(v);
    }
    if pixels.len() != rows * cols {
        return Err(format!(
            "expected {} pixels, found {}",
            rows * cols,
            pixels.len()
        ));
    }
    Ok(ImageGrid { rows, cols, pixels })
}

/// Canonical ASCII PGM, one row per line.
pub fn write_pgm(img: &ImageGrid) -> String {
    let mut out = format!("P2\n{} {}\n255\n", img.cols, img.rows);
    for r in 0..img.rows {
        let row: Vec<String> = (0..img.cols)
            .map(|c| (img.get(r, c).round().clamp(0.0, 255.0) as u32).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_roundtrip() {
        let mut img = ImageGrid::new(3, 4);
        for i in 0..12 {
            img.pixels[i] = (i * 20) as f64;
        }
        let text = write_pgm(&img);
        let back = parse_pgm(&text).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm_with_comments() {
        let text = "P2\n# a comment\n2 2\n255\n0 128\n# mid\n255 64\n";
        let img = parse_pgm(text).unwrap();
        assert_eq!(img.get(0, 1), 128.0);
        assert_eq!(img.get(1, 0), 255.0);
    }

    #[test]
    fn pgm_pixel_count_checked() {
        assert!(parse_pgm("P2\n2 2\n255\n0 1 2\n").is_err());
    }

    #[test]
    fn numbers_csv_flattens_rows() {
        let v = parse_numbers_csv("1,2,3\n# comment\n4.5\n\n6,7\n").unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.5, 6.0, 7.0]);
    }

    #[test]
    fn config_json_parses_with_defaults() {
        let json = r#"
{
  "source": "bench.axc",
  "inputs": "inputs.json",
  "error_class": "rmse",
  "error_bound": 0.3,
  "capacitors_uf": [220, 330],
  "trace": "trace.csv",
  "output_dir": "out"
}
"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
        assert!(cfg.trace_repeat);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.trace.paths(), vec!["trace.csv"]);
        assert!(matches!(cfg.platform, PlatformRef::Preset(ref p) if p == "cortex-m"));
        assert_eq!(cfg.loop_kinds().unwrap().len(), 3);
    }

    #[test]
    fn bad_error_class_rejected() {
        let json = r#"
{
  "source": "bench.axc",
  "inputs": "inputs.json",
  "error_class": "nope",
  "error_bound": 0.3,
  "capacitors_uf": [220],
  "trace": "trace.csv",
  "output_dir": "out"
}
"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert!(matches!(cfg.validate(), Err(PipelineError::Config { .. })));
    }
}
