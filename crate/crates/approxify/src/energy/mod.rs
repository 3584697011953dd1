//! Checkpointing simulator: capacitor charge/discharge under a harvested
//! voltage trace, on/off hysteresis, voltage-triggered checkpointing,
//! reboot/replay accounting, and non-progress detection.

mod sim;
mod trace;

pub use sim::{
    min_viable_capacitor, simulate_compiled, simulate_intermittent, write_event_log_csv,
    CapacitorSpec, SimEvent, SimEventKind, SimOptions, SimResult,
};
pub use trace::{load_trace, parse_trace_csv, EnergyTrace};

use crate::interp::Fault;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EnergyError {
    #[error("failed to read trace `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("trace parse error on line {line}: {message}")]
    TraceParse { line: u64, message: String },
    #[error("trace time not strictly increasing at line {line}")]
    NonMonotoneTime { line: u64 },
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("invalid capacitor spec: {0}")]
    InvalidCapacitor(String),
    #[error("no viable capacitor among {tried:?} F")]
    NoViableCapacitor { tried: Vec<f64> },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("{0}")]
    Setup(EnergyError),
    #[error("non-progressive at {at_ms} ms after {reboots} reboot(s): {detail}")]
    NonProgressive {
        at_ms: u64,
        reboots: u64,
        detail: String,
    },
    #[error("trace exhausted at {at_ms} ms before completion")]
    TraceExhausted { at_ms: u64 },
    #[error("program fault at {at_ms} ms: {fault}")]
    Fault { fault: Fault, at_ms: u64 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_continuous, InputCase, PlatformModel, ProgramOutput};
    use crate::lang::parse_source;

    /// A plain counted burner loop sized near the given cycle count.
    fn burner_src(iterations: u64) -> String {
        format!(
            "func main() {{ var x: int = 0; \
             for (var i: int = 0; i < {iterations}; i = i + 1) {{ x = x + 1; }} \
             emit_num(x); }}"
        )
    }

    fn testbed_platform(checkpoint_cost: u64, restore_cost: u64) -> PlatformModel {
        let mut p = PlatformModel::cortex_m();
        p.checkpoint_cost_cycles = checkpoint_cost;
        p.restore_cost_cycles = restore_cost;
        p
    }

    /// Paper-style testbed point: constant 5 V, 220 uF, 3.3/1.8 V, 12 mA,
    /// 100 kHz, zero-cost checkpoints. The closed-form oracle:
    /// burst charge Q = C*dV = 330 uC, burst time 27.5 ms -> 2750 cycles
    /// per burst, so a ~27.5k-cycle program needs ~10 bursts and one
    /// checkpoint per brownout.
    #[test]
    fn constant_trace_burst_oracle() {
        let plat = testbed_platform(0, 0);
        let program = parse_source(&burner_src(2113)).unwrap();
        let input = InputCase::default();

        let (_, logical) = run_continuous(&program, &input, &plat, 10_000_000, 0).unwrap();
        assert!(
            (26_000..=29_000).contains(&logical),
            "burner should land near 27.5k cycles, got {logical}"
        );

        let mut cap = CapacitorSpec::from_uf(220.0, &plat);
        cap.v_chk = 1.85;
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let res = simulate_intermittent(
            &program,
            &input,
            &plat,
            &cap,
            &trace,
            &SimOptions::default(),
        )
        .unwrap();

        assert!(res.completed);
        assert_eq!(res.logical_cycles, logical);
        assert!(res.total_cycles >= res.logical_cycles);

        let expected = (logical as f64 / 2750.0).round() as i64;
        let got = res.checkpoints as i64;
        assert!(
            (got - expected).abs() <= 1,
            "checkpoints {got} not within 1 of closed-form {expected}"
        );

        // OFF-phase duration: analytic RC charge 1.8 -> 3.3 V from 5 V
        // through 500 ohm, 220 uF: tau*ln((5-1.8)/(5-3.3)) ~= 69.6 ms.
        let analytic = 0.5e3 * 220e-6 * 1000.0 * f64::ln((5.0 - 1.8) / (5.0 - 3.3));
        let mut gaps = Vec::new();
        let mut last_reboot: Option<u64> = None;
        for e in &res.event_log {
            match e.kind {
                SimEventKind::Reboot => last_reboot = Some(e.t_ms),
                SimEventKind::Boot => {
                    if let Some(r) = last_reboot.take() {
                        gaps.push((e.t_ms - r) as f64);
                    }
                }
                _ => {}
            }
        }
        assert!(!gaps.is_empty());
        for gap in &gaps {
            assert!(
                (gap - analytic).abs() <= 1.0,
                "off-phase {gap} ms deviates from analytic {analytic:.2} ms"
            );
        }
    }

    #[test]
    fn on_phase_voltage_stays_in_bounds() {
        let plat = testbed_platform(50, 25);
        let program = parse_source(&burner_src(1000)).unwrap();
        let cap = CapacitorSpec::from_uf(220.0, &plat);
        let trace = EnergyTrace::constant(5.0, 100.0).with_repeat(true);
        let res = simulate_intermittent(
            &program,
            &InputCase::default(),
            &plat,
            &cap,
            &trace,
            &SimOptions::default(),
        )
        .unwrap();
        for e in &res.event_log {
            assert!(e.volts >= cap.v_off - 1e-9, "event below v_off: {e:?}");
            assert!(
                e.volts <= trace.max_volts() + 1e-9,
                "event above source: {e:?}"
            );
        }
    }

    #[test]
    fn intermittent_output_equals_continuous() {
        let src = r#"
func main() {
    var acc: float = 0.0;
    for (var i: int = 0; i < 300; i = i + 1) {
        acc = acc + rand() * 0.5 + sqrt(1.0 * i);
        if (i % 50 == 0) {
            emit_num(acc);
        }
    }
    emit_num(acc);
}
"#;
        let program = parse_source(src).unwrap();
        let plat = testbed_platform(80, 40);
        let input = InputCase::default();
        let (reference, ref_cycles) =
            run_continuous(&program, &input, &plat, 10_000_000, 42).unwrap();

        let cap = CapacitorSpec::from_uf(220.0, &plat);
        let trace = EnergyTrace::constant(5.0, 500.0).with_repeat(true);
        let opts = SimOptions {
            seed: 42,
            ..Default::default()
        };
        let res = simulate_intermittent(&program, &input, &plat, &cap, &trace, &opts).unwrap();
        assert!(res.completed);
        assert!(res.reboots > 0, "test should actually exercise replay");
        assert!(res.output.unwrap().bits_eq(&reference));
        assert_eq!(res.logical_cycles, ref_cycles);
        assert!(res.total_cycles > ref_cycles, "replays must add cycles");
    }

    #[test]
    fn simulation_is_deterministic() {
        let program = parse_source(&burner_src(2000)).unwrap();
        let plat = testbed_platform(60, 30);
        let cap = CapacitorSpec::from_uf(220.0, &plat);
        let trace =
            parse_trace_csv("time_ms,volts\n0,5.0\n40,5.0\n41,0.6\n80,0.6\n81,4.8\n160,5.2\n")
                .unwrap()
                .with_repeat(true);
        let opts = SimOptions {
            seed: 9,
            ..Default::default()
        };
        let a = simulate_intermittent(&program, &InputCase::default(), &plat, &cap, &trace, &opts)
            .unwrap();
        let b = simulate_intermittent(&program, &InputCase::default(), &plat, &cap, &trace, &opts)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(
            write_event_log_csv(&a.event_log),
            write_event_log_csv(&b.event_log)
        );
    }

    #[test]
    fn nonprogressive_when_checkpoint_cannot_fit() {
        // checkpoint cost larger than a whole burst: the device can never
        // commit and replays from the start forever
        let mut plat = testbed_platform(100_000, 0);
        plat.checkpoint_cost_cycles = 100_000;
        let program = parse_source(&burner_src(5_000)).unwrap();
        let mut cap = CapacitorSpec::from_uf(220.0, &plat);
        cap.v_chk = 3.0;
        let trace = EnergyTrace::constant(5.0, 200.0).with_repeat(true);
        let err = simulate_intermittent(
            &program,
            &InputCase::default(),
            &plat,
            &cap,
            &trace,
            &SimOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SimError::NonProgressive { .. }), "{err:?}");
    }

    #[test]
    fn trace_exhaustion_reported() {
        let program = parse_source(&burner_src(50_000)).unwrap();
        let plat = testbed_platform(50, 25);
        let cap = CapacitorSpec::from_uf(220.0, &plat);
        let trace = EnergyTrace::constant(5.0, 120.0); // no repeat
        let err = simulate_intermittent(
            &program,
            &InputCase::default(),
            &plat,
            &cap,
            &trace,
            &SimOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SimError::TraceExhausted { .. }));
    }

    #[test]
    fn never_booting_trace_is_nonprogressive() {
        let program = parse_source(&burner_src(100)).unwrap();
        let plat = testbed_platform(50, 25);
        let cap = CapacitorSpec::from_uf(220.0, &plat);
        let trace = EnergyTrace::constant(3.0, 100.0).with_repeat(true);
        let err = simulate_intermittent(
            &program,
            &InputCase::default(),
            &plat,
            &cap,
            &trace,
            &SimOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SimError::NonProgressive { .. }));
    }

    #[test]
    fn program_fault_surfaces_with_time() {
        let src = "func main() { var a: int[2]; a[5] = 1; }";
        let program = parse_source(src).unwrap();
        let plat = testbed_platform(50, 25);
        let cap = CapacitorSpec::from_uf(220.0, &plat);
        let trace = EnergyTrace::constant(5.0, 500.0).with_repeat(true);
        let err = simulate_intermittent(
            &program,
            &InputCase::default(),
            &plat,
            &cap,
            &trace,
            &SimOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SimError::Fault { .. }));
    }

    #[test]
    fn min_viable_capacitor_picks_smallest_completing() {
        // sized so that small capacitors cannot make progress: huge
        // checkpoint cost relative to small bursts
        let mut plat = testbed_platform(2_000, 100);
        plat.checkpoint_cost_cycles = 2_000;
        let program = parse_source(&burner_src(4_000)).unwrap();
        let input = InputCase::default();
        let trace = EnergyTrace::constant(5.0, 1000.0).with_repeat(true);
        let template = CapacitorSpec::from_uf(220.0, &plat);
        let candidates: Vec<f64> = [22.0, 47.0, 220.0, 330.0]
            .iter()
            .map(|uf| uf * 1e-6)
            .collect();
        let best = min_viable_capacitor(
            &program,
            &input,
            &plat,
            &trace,
            &template,
            &candidates,
            &SimOptions::default(),
        )
        .unwrap();
        // 22 uF burst = 275 cycles < restore+trigger window; must step up
        assert!(best > 22.0e-6, "22 uF cannot fit a 2000-cycle checkpoint");

        // single viable candidate returns it
        let only = min_viable_capacitor(
            &program,
            &input,
            &plat,
            &trace,
            &template,
            &[best],
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(only, best);

        // all-below-floor list errors
        let err = min_viable_capacitor(
            &program,
            &input,
            &plat,
            &trace,
            &template,
            &[1.0e-6, 2.0e-6],
            &SimOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EnergyError::NoViableCapacitor { .. }));
    }

    #[test]
    fn completed_output_matches_for_image_program() {
        let src = r#"
output image(4, 4);
func main() {
    for (var r: int = 0; r < 4; r = r + 1) {
        for (var c: int = 0; c < 4; c = c + 1) {
            emit_pixel(r, c, in_pixel(r, c) * 2.0);
        }
    }
}
"#;
        let program = parse_source(src).unwrap();
        let plat = testbed_platform(40, 20);
        let mut img = crate::interp::ImageGrid::new(4, 4);
        for i in 0..16 {
            img.pixels[i] = i as f64 * 3.0;
        }
        let input = InputCase {
            image: Some(img),
            ..Default::default()
        };
        let (reference, _) = run_continuous(&program, &input, &plat, 1_000_000, 3).unwrap();
        let cap = CapacitorSpec::from_uf(100.0, &plat);
        let trace = EnergyTrace::constant(4.5, 300.0).with_repeat(true);
        let opts = SimOptions {
            seed: 3,
            ..Default::default()
        };
        let res = simulate_intermittent(&program, &input, &plat, &cap, &trace, &opts).unwrap();
        match (&res.output, &reference) {
            (Some(a), b) => assert!(a.bits_eq(b)),
            _ => panic!("missing output"),
        }
        if let Some(ProgramOutput::Image(img)) = res.output {
            assert_eq!(img.get(1, 1), 30.0);
        }
    }
}
