//! Safety mapping and the approximation-intensity sweep.

mod probe;
mod select;
mod sweep;
mod validator;

pub use probe::{probe_safety, ProbeOutcome, ProbeReport};
pub use select::{reference_curves, select_best};
pub use sweep::{
    sweep, FloatSchedule, GeomSchedule, IntSchedule, LoopKind, RecordStatus, SweepRecord,
    SweepSettings,
};
pub use validator::{Evaluation, ValidatorContext};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SearchError {
    #[error("no sweep point satisfies the error bound")]
    NoFeasiblePoint,
    #[error("baseline evaluation failed: {detail}")]
    Baseline { detail: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{CapacitorSpec, EnergyTrace};
    use crate::interp::{InputCase, PlatformModel};
    use crate::lang::parse_source;
    use crate::metrics::ErrorClass;
    use crate::transform::{enumerate_blocks, ApproxTechnique, BlockKind};

    fn plat() -> PlatformModel {
        PlatformModel::cortex_m()
    }

    fn setup<'a>(
        src: &str,
        cases: &'a [InputCase],
        plat: &'a PlatformModel,
        cap: &'a CapacitorSpec,
        trace: &'a EnergyTrace,
        seed: u64,
    ) -> (crate::lang::Program, ValidatorContext<'a>) {
        let p = parse_source(src).unwrap();
        let ctx = ValidatorContext::new(
            &p,
            cases,
            plat,
            cap,
            trace,
            ErrorClass::EuclideanDistance,
            seed,
            10.0,
            10_000_000,
        )
        .unwrap();
        (p, ctx)
    }

    /// Paired accumulation: perforation degrades the mean gently, so the
    /// dominant loop is a benign approximation target.
    const BENIGN_MEAN: &str = r#"
output numeric;
func main() {
    var n: int = in_len();
    var sum: float = 0.0;
    var cnt: float = 0.0;
    for (var i: int = 0; i < n; i = i + 1) {
        sum = sum + in_num(i) * 2.0;
        cnt = cnt + 1.0;
    }
    emit_num(sum / cnt);
}
"#;

    fn wavy_case(n: usize) -> InputCase {
        let numbers: Vec<f64> = (0..n)
            .map(|i| 10.0 + (i as f64 * 0.37).sin() * 3.0 + i as f64 * 0.001)
            .collect();
        InputCase::numeric("wavy", numbers)
    }

    #[test]
    fn probe_retains_benign_loop() {
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let cases = vec![wavy_case(800)];
        let (p, ctx) = setup(BENIGN_MEAN, &cases, &platform, &cap, &trace, 1);
        let blocks = enumerate_blocks(&p);
        let report = probe_safety(&p, &blocks, &ctx, 0.3);
        assert_eq!(report.safe.len(), 1, "outcomes: {:#?}", report.outcomes);
        assert_eq!(report.safe[0].kind, BlockKind::CountedLoop);
    }

    #[test]
    fn probe_prunes_no_gain_loop() {
        // tiny loop next to dominant work: perforating it cannot shift
        // checkpoint counts
        let src = r#"
output numeric;
func main() {
    var trim: float = 0.0;
    for (var k: int = 0; k < 4; k = k + 1) {
        trim = trim + 0.25;
    }
    var n: int = in_len();
    var sum: float = 0.0;
    var cnt: float = 0.0;
    for (var i: int = 0; i < n; i = i + 1) {
        sum = sum + in_num(i) * 2.0;
        cnt = cnt + 1.0;
    }
    emit_num(sum / cnt + trim * 0.0001);
}
"#;
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let cases = vec![wavy_case(800)];
        let (p, ctx) = setup(src, &cases, &platform, &cap, &trace, 1);
        let blocks = enumerate_blocks(&p);
        let report = probe_safety(&p, &blocks, &ctx, 0.3);
        let trim_outcome = &report.outcomes[0];
        assert!(
            !trim_outcome.retained,
            "tiny loop kept: {:#?}",
            report.outcomes
        );
        assert!(
            trim_outcome.reason.contains("not below 1"),
            "{}",
            trim_outcome.reason
        );
        assert!(report.outcomes[1].retained, "main loop should survive");
    }

    #[test]
    fn probe_prunes_error_blowup_loop() {
        // unpaired accumulation: perforation halves the emitted total
        let src = r#"
output numeric;
func main() {
    var n: int = in_len();
    var sum: float = 0.0;
    for (var i: int = 0; i < n; i = i + 1) {
        sum = sum + sqrt(in_num(i) + 1.0) * 2.0;
    }
    emit_num(sum);
}
"#;
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let cases = vec![wavy_case(800)];
        let (p, ctx) = setup(src, &cases, &platform, &cap, &trace, 1);
        let blocks = enumerate_blocks(&p);
        let report = probe_safety(&p, &blocks, &ctx, 0.1);
        assert!(report.safe.is_empty());
        assert!(report.outcomes[0].reason.contains("exceeds bound"));
    }

    #[test]
    fn probe_prunes_oob_on_perforation() {
        // loop A plants sentinels, loop B overwrites them with valid
        // indices, loop C consumes; perforating B leaves -1 sentinels and
        // loop C walks off the array
        let src = r#"
output numeric;
func main() {
    var idx: int[16];
    var data: float[16];
    for (var a: int = 0; a < 16; a = a + 1) {
        idx[a] = -1;
    }
    for (var b: int = 0; b < 16; b = b + 1) {
        idx[b] = 15 - b;
    }
    var n: int = in_len();
    var sink: float = 0.0;
    var cnt: float = 0.0;
    for (var w: int = 0; w < n; w = w + 1) {
        sink = sink + in_num(w);
        cnt = cnt + 1.0;
    }
    for (var c: int = 0; c < 16; c = c + 1) {
        data[idx[c]] = 1.0;
    }
    emit_num(sink / cnt + data[0] * 0.001);
}
"#;
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let cases = vec![wavy_case(800)];
        let (p, ctx) = setup(src, &cases, &platform, &cap, &trace, 1);
        let blocks = enumerate_blocks(&p);
        let report = probe_safety(&p, &blocks, &ctx, 0.3);
        let b_outcome = report
            .outcomes
            .iter()
            .find(|o| o.block.path == crate::lang::NodePath(vec![3]))
            .unwrap();
        assert!(!b_outcome.retained);
        assert!(b_outcome.reason.contains("crash"), "{}", b_outcome.reason);
        assert!(
            b_outcome.reason.contains("out-of-bounds"),
            "{}",
            b_outcome.reason
        );
    }

    #[test]
    fn probe_prunes_watchdog_infinite_loop() {
        // the outer loop terminates only when the inner loop's exact
        // contribution lands on the boundary; sampling steps over it
        let src = r#"
output numeric;
func main() {
    var n: int = in_len();
    var sink: float = 0.0;
    var cnt: float = 0.0;
    for (var w: int = 0; w < n; w = w + 1) {
        sink = sink + in_num(w);
        cnt = cnt + 1.0;
    }
    var total: int = 0;
    while (total != 100) {
        for (var j: int = 0; j < 5; j = j + 1) {
            total = total + 4;
        }
    }
    emit_num(sink / cnt + total * 0.0001);
}
"#;
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let cases = vec![wavy_case(800)];
        let (p, ctx) = setup(src, &cases, &platform, &cap, &trace, 1);
        let blocks = enumerate_blocks(&p);
        let report = probe_safety(&p, &blocks, &ctx, 0.3);
        let inner = report
            .outcomes
            .iter()
            .find(|o| o.block.path == crate::lang::NodePath(vec![5, 1]))
            .unwrap();
        assert_eq!(inner.block.kind, BlockKind::CountedLoop);
        assert!(!inner.retained);
        assert!(inner.reason.contains("watchdog"), "{}", inner.reason);
    }

    #[test]
    fn sweep_ladder_length_matches_schedule() {
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let cases = vec![wavy_case(800)];
        let (p, ctx) = setup(BENIGN_MEAN, &cases, &platform, &cap, &trace, 1);
        let blocks = enumerate_blocks(&p);
        let safe = probe_safety(&p, &blocks, &ctx, 0.9).safe;
        let mut settings = SweepSettings::new(0.9, 1);
        settings.sampling = IntSchedule {
            start: 2,
            step: 1,
            max: 4,
        };
        let records = sweep(&p, &safe, &[LoopKind::Sampling], &settings, &ctx);
        // error never approaches 0.9 on the paired mean, so the ladder
        // runs the full 3-step schedule
        assert_eq!(records.len(), 3, "{records:#?}");
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.step, i as u32);
            assert_eq!(r.status, RecordStatus::Ok);
            assert!(r.e_m < 0.9);
        }
        // checkpoints fall with intensity on this loop-dominated program
        assert!(records.last().unwrap().c <= records[0].c);
    }

    #[test]
    fn sweep_stops_after_bound_violation_and_records_it() {
        // truncation on the mean with drifting data grows error steadily;
        // a tight bound stops the ladder after the violating step
        let src = r#"
output numeric;
func main() {
    var n: int = in_len();
    var sum: float = 0.0;
    var cnt: float = 0.0;
    for (var i: int = 0; i < n; i = i + 1) {
        sum = sum + sqrt(in_num(i) * in_num(i) + 1.0);
        cnt = cnt + 1.0;
    }
    emit_num(sum / cnt);
}
"#;
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        // strongly trending data: truncating the tail shifts the mean hard
        let numbers: Vec<f64> = (0..800).map(|i| 1.0 + i as f64 * 0.05).collect();
        let cases = vec![InputCase::numeric("trend", numbers)];
        let (p, ctx) = setup(src, &cases, &platform, &cap, &trace, 1);
        let blocks = enumerate_blocks(&p);
        let safe = probe_safety(&p, &blocks, &ctx, 0.9).safe;
        assert_eq!(safe.len(), 1);
        let mut settings = SweepSettings::new(0.08, 1);
        settings.truncation = FloatSchedule {
            start: 0.1,
            step: 0.2,
            max: 0.9,
        };
        let records = sweep(&p, &safe, &[LoopKind::Truncation], &settings, &ctx);
        assert!(!records.is_empty());
        let last = records.last().unwrap();
        assert!(last.e_m > 0.08, "ladder must record the violating point");
        for r in &records[..records.len() - 1] {
            assert!(r.e_m < 0.08);
        }
        assert!(
            records.len() < 5,
            "ladder should stop early, got {records:#?}"
        );
    }

    #[test]
    fn sweep_is_deterministic() {
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let cases = vec![wavy_case(600)];
        let (p, ctx) = setup(BENIGN_MEAN, &cases, &platform, &cap, &trace, 7);
        let blocks = enumerate_blocks(&p);
        let safe = probe_safety(&p, &blocks, &ctx, 0.5).safe;
        let settings = SweepSettings::new(0.5, 7);
        let a = sweep(&p, &safe, &LoopKind::all(), &settings, &ctx);
        let b = sweep(&p, &safe, &LoopKind::all(), &settings, &ctx);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.e_m.to_bits(), y.e_m.to_bits());
            assert_eq!(x.c.to_bits(), y.c.to_bits());
            assert_eq!(x.checkpoints, y.checkpoints);
        }
    }

    #[test]
    fn empty_safe_set_yields_empty_table() {
        let platform = plat();
        let cap = CapacitorSpec::from_uf(220.0, &platform);
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let cases = vec![wavy_case(600)];
        let (p, ctx) = setup(BENIGN_MEAN, &cases, &platform, &cap, &trace, 1);
        let settings = SweepSettings::new(0.3, 1);
        let records = sweep(&p, &[], &LoopKind::all(), &settings, &ctx);
        assert!(records.is_empty());
    }

    fn record(kind: LoopKind, step: u32, e: f64, c: f64) -> SweepRecord {
        SweepRecord {
            loop_kind: kind,
            loop_technique: ApproxTechnique::Sampling { factor: step + 2 },
            memo_technique: ApproxTechnique::Memoization {
                tolerance: 0.01,
                capacity: 16,
            },
            step,
            e_m: e,
            c,
            objective: e + c,
            checkpoints: 0,
            total_cycles: 0,
            status: RecordStatus::Ok,
            mode: None,
            crash_reason: None,
        }
    }

    #[test]
    fn select_best_minimizes_sum_within_bound() {
        let d = vec![
            record(LoopKind::Sampling, 0, 0.1, 0.9),
            record(LoopKind::Sampling, 1, 0.28, 0.6),
            record(LoopKind::Sampling, 2, 0.5, 0.4),
        ];
        let best = select_best(&d, 0.35).unwrap();
        assert_eq!(best.step, 1);
        assert!((best.objective - 0.88).abs() < 1e-12);
    }

    #[test]
    fn select_best_single_and_empty() {
        let d = vec![record(LoopKind::Random, 0, 0.2, 0.7)];
        assert_eq!(select_best(&d, 0.3).unwrap().step, 0);
        assert!(matches!(
            select_best(&d, 0.1),
            Err(SearchError::NoFeasiblePoint)
        ));
        let empty: Vec<SweepRecord> = Vec::new();
        assert!(matches!(
            select_best(&empty, 0.5),
            Err(SearchError::NoFeasiblePoint)
        ));
    }

    #[test]
    fn select_best_tie_breaks() {
        // equal objectives: prefer smaller error
        let d = vec![
            record(LoopKind::Truncation, 3, 0.3, 0.4),
            record(LoopKind::Truncation, 1, 0.2, 0.5),
        ];
        assert_eq!(select_best(&d, 1.0).unwrap().e_m, 0.2);
        // equal objective and error: prefer smaller step
        let d = vec![
            record(LoopKind::Truncation, 3, 0.2, 0.5),
            record(LoopKind::Truncation, 1, 0.2, 0.5),
        ];
        assert_eq!(select_best(&d, 1.0).unwrap().step, 1);
        // then technique order
        let d = vec![
            record(LoopKind::Random, 1, 0.2, 0.5),
            record(LoopKind::Truncation, 1, 0.2, 0.5),
        ];
        assert_eq!(
            select_best(&d, 1.0).unwrap().loop_kind,
            LoopKind::Truncation
        );
    }

    #[test]
    fn reference_curves_points() {
        let (e0, c0) = reference_curves(0.0);
        assert_eq!(e0, 0.0);
        assert_eq!(c0, 1.0);
        let (e2, c2) = reference_curves(2.0);
        assert!((e2 - (std::f64::consts::E - 1.0)).abs() < 1e-12);
        assert!((c2 - (-4.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn reference_curve_minimizer() {
        // d/da [e^(a/2) - 1 + e^(-2a)] = 0  =>  a = ln(4)/2.5
        let analytic = 4.0f64.ln() / 2.5;
        assert!((analytic - 0.5545).abs() < 1e-4);
        let mut best_a = 0.0;
        let mut best = f64::INFINITY;
        let mut a = 0.0;
        while a <= 2.0 {
            let (e, c) = reference_curves(a);
            if e + c < best {
                best = e + c;
                best_a = a;
            }
            a += 1e-4;
        }
        assert!((best_a - analytic).abs() < 1e-3);
    }
}
