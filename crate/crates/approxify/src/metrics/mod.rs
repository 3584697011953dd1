//! Error analyzer: output distance classes, the error metric, and the
//! checkpoint reduction ratio.

mod distance;
mod report;

pub use distance::{distance, edit_distance, ssim, Distance, ErrorClass};
pub use report::{checkpoint_ratio, error_metric, ErrorMode, ErrorReport};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricError {
    #[error("error class `{class}` does not apply to these output kinds")]
    KindMismatch { class: &'static str },
    #[error("output shapes differ: {detail}")]
    ShapeMismatch { detail: String },
    #[error("output sequences not aligned: {original} vs {approximated} cases")]
    CaseMismatch {
        original: usize,
        approximated: usize,
    },
}
