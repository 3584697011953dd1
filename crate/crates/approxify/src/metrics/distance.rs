//! Output distance functions, one per error class.
//!
//! `distance(cls, a, b)` treats `b` as the reference where a normalizer or a
//! ground truth is needed (relative-error normalization, F1, WER). Raw values
//! are symmetric for every class except F1.

use crate::interp::{ImageGrid, ProgramOutput};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    // numeric outputs
    EuclideanDistance,
    ManhattanDistance,
    Rmse,
    // text outputs
    WordErrorRate,
    LevenshteinDistance,
    // image outputs
    F1Score,
    PixelErrorRate,
    Ssim,
}

impl ErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::EuclideanDistance => "euclidean",
            ErrorClass::ManhattanDistance => "manhattan",
            ErrorClass::Rmse => "rmse",
            ErrorClass::WordErrorRate => "wer",
            ErrorClass::LevenshteinDistance => "levenshtein",
            ErrorClass::F1Score => "f1",
            ErrorClass::PixelErrorRate => "pixel-error-rate",
            ErrorClass::Ssim => "ssim",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "euclidean" => ErrorClass::EuclideanDistance,
            "manhattan" => ErrorClass::ManhattanDistance,
            "rmse" => ErrorClass::Rmse,
            "wer" => ErrorClass::WordErrorRate,
            "levenshtein" => ErrorClass::LevenshteinDistance,
            "f1" => ErrorClass::F1Score,
            "pixel-error-rate" => ErrorClass::PixelErrorRate,
            "ssim" => ErrorClass::Ssim,
            _ => return None,
        })
    }

    pub fn all() -> [ErrorClass; 8] {
        [
            ErrorClass::EuclideanDistance,
            ErrorClass::ManhattanDistance,
            ErrorClass::Rmse,
            ErrorClass::WordErrorRate,
            ErrorClass::LevenshteinDistance,
            ErrorClass::F1Score,
            ErrorClass::PixelErrorRate,
            ErrorClass::Ssim,
        ]
    }

    fn accepts(self, out: &ProgramOutput) -> bool {
        matches!(
            (self, out),
            (
                ErrorClass::EuclideanDistance | ErrorClass::ManhattanDistance | ErrorClass::Rmse,
                ProgramOutput::Numeric(_)
            ) | (
                ErrorClass::WordErrorRate | ErrorClass::LevenshteinDistance,
                ProgramOutput::Text(_)
            ) | (
                ErrorClass::F1Score | ErrorClass::PixelErrorRate | ErrorClass::Ssim,
                ProgramOutput::Image(_)
            )
        )
    }
}

/// Raw and [0,1]-normalized distance between two outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    pub raw: f64,
    pub normalized: f64,
}

pub fn distance(
    cls: ErrorClass,
    a: &ProgramOutput,
    b: &ProgramOutput,
) -> Result<Distance, MetricError> {
    if !cls.accepts(a) || !cls.accepts(b) {
        return Err(MetricError::KindMismatch { class: cls.name() });
    }
    match (a, b) {
        (ProgramOutput::Numeric(x), ProgramOutput::Numeric(y)) => {
            if x.len() != y.len() {
                return Err(MetricError::ShapeMismatch {
                    detail: format!("numeric lengths {} vs {}", x.len(), y.len()),
                });
            }
            Ok(match cls {
                ErrorClass::EuclideanDistance => {
                    let raw = x
                        .iter()
                        .zip(y)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    let refn = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                    relative(raw, refn)
                }
                ErrorClass::ManhattanDistance => {
                    let raw = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>();
                    let refn = y.iter().map(|v| v.abs()).sum::<f64>();
                    relative(raw, refn)
                }
                ErrorClass::Rmse => {
                    let n = x.len().max(1) as f64;
                    let raw =
                        (x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n).sqrt();
                    let refn = (y.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
                    relative(raw, refn)
                }
                _ => unreachable!(),
            })
        }
        (ProgramOutput::Text(x), ProgramOutput::Text(y)) => Ok(match cls {
            ErrorClass::WordErrorRate => {
                let raw = edit_distance(x, y) as f64;
                let normalized = if y.is_empty() {
                    if x.is_empty() {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    (raw / y.len() as f64).min(1.0)
                };
                Distance { raw, normalized }
            }
            ErrorClass::LevenshteinDistance => {
                let xs: Vec<char> = x.join(" ").chars().collect();
                let ys: Vec<char> = y.join(" ").chars().collect();
                let raw = edit_distance(&xs, &ys) as f64;
                let longest = xs.len().max(ys.len());
                let normalized = if longest == 0 {
                    0.0
                } else {
                    raw / longest as f64
                };
                Distance { raw, normalized }
            }
            _ => unreachable!(),
        }),
        (ProgramOutput::Image(x), ProgramOutput::Image(y)) => {
            if x.rows != y.rows || x.cols != y.cols {
                return Err(MetricError::ShapeMismatch {
                    detail: format!("image {}x{} vs {}x{}", x.rows, x.cols, y.rows, y.cols),
                });
            }
            Ok(match cls {
                ErrorClass::PixelErrorRate => {
                    let differing = x
                        .pixels
                        .iter()
                        .zip(&y.pixels)
                        .filter(|(a, b)| a != b)
                        .count();
                    let total = x.pixels.len().max(1);
                    Distance {
                        raw: differing as f64,
                        normalized: differing as f64 / total as f64,
                    }
                }
                ErrorClass::F1Score => {
                    let f1 = f1_score(x, y);
                    Distance {
                        raw: f1,
                        normalized: 1.0 - f1,
                    }
                }
                ErrorClass::Ssim => {
                    let s = ssim(x, y);
                    Distance {
                        raw: s,
                        normalized: (1.0 - s).clamp(0.0, 1.0),
                    }
                }
                _ => unreachable!(),
            })
        }
        _ => Err(MetricError::KindMismatch { class: cls.name() }),
    }
}

fn relative(raw: f64, ref_norm: f64) -> Distance {
    let normalized = if raw == 0.0 {
        0.0
    } else if ref_norm == 0.0 {
        1.0
    } else {
        (raw / ref_norm).min(1.0)
    };
    Distance { raw, normalized }
}

/// Classic full-matrix edit distance over any equatable items.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let n = a.len();
    let m = b.len();
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// F1 on images binarized at 128; `pred` is the prediction, `truth` the
/// reference. Two all-negative images score 1.
fn f1_score(pred: &ImageGrid, truth: &ImageGrid) -> f64 {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fnn = 0u64;
    for (p, t) in pred.pixels.iter().zip(&truth.pixels) {
        let p = *p >= 128.0;
        let t = *t >= 128.0;
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    if tp == 0 && fp == 0 && fnn == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fnn as f64)
}

const SSIM_WINDOW: usize = 8;
const SSIM_L: f64 = 255.0;

/// Mean SSIM over 8x8 non-overlapping windows (partial edge windows
/// included), population statistics, C1=(0.01 L)^2, C2=(0.03 L)^2.
pub fn ssim(x: &ImageGrid, y: &ImageGrid) -> f64 {
    let c1 = (0.01 * SSIM_L) * (0.01 * SSIM_L);
    let c2 = (0.03 * SSIM_L) * (0.03 * SSIM_L);
    let mut sum = 0.0;
    let mut windows = 0u64;
    let mut r0 = 0;
    while r0 < x.rows {
        let r1 = (r0 + SSIM_WINDOW).min(x.rows);
        let mut c0 = 0;
        while c0 < x.cols {
            let c1_edge = (c0 + SSIM_WINDOW).min(x.cols);
            let n = ((r1 - r0) * (c1_edge - c0)) as f64;
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut sxx = 0.0;
            let mut syy = 0.0;
            let mut sxy = 0.0;
            for r in r0..r1 {
                for c in c0..c1_edge {
                    let a = x.get(r, c);
                    let b = y.get(r, c);
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            let mx = sx / n;
            let my = sy / n;
            let vx = sxx / n - mx * mx;
            let vy = syy / n - my * my;
            let cov = sxy / n - mx * my;
            let val = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            sum += val;
            windows += 1;
            c0 = c1_edge;
        }
        r0 = r1;
    }
    if windows == 0 {
        1.0
    } else {
        sum / windows as f64
    }
}
