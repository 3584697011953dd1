//! Selection: minimize `e_m + c` subject to the error bound.

use super::sweep::SweepRecord;
use super::SearchError;

/// Pick the feasible record minimizing `e_m + c`. Ties break toward the
/// smaller error, then the smaller intensity step, then technique order.
pub fn select_best(records: &[SweepRecord], error_bound: f64) -> Result<&SweepRecord, SearchError> {
    records
        .iter()
        .filter(|r| r.feasible(error_bound))
        .min_by(|a, b| {
            a.objective
                .total_cmp(&b.objective)
                .then(a.e_m.total_cmp(&b.e_m))
                .then(a.tie_break_rank().cmp(&b.tie_break_rank()))
        })
        .ok_or(SearchError::NoFeasiblePoint)
}

/// Error and checkpoint-ratio model curves against approximation intensity:
/// `(exp(a/2) - 1, exp(-2a))`. Report overlays only; never used to select.
pub fn reference_curves(a: f64) -> (f64, f64) {
    ((a / 2.0).exp() - 1.0, (-2.0 * a).exp())
}
