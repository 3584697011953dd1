//! Intermittent execution under a harvested-voltage trace.
//!
//! Time advances in 1 ms ticks. While the device is off the capacitor charges
//! through the source resistor (`dV/dt = (V_src - V)/(R*C)`, explicit Euler).
//! At `V >= v_on` the device boots and executes `clock_hz/1000` cycles per
//! tick (sub-tick remainders carry over), discharging at `I_active/C` and, if
//! `harvest_while_on`, still charging from the source. Crossing `v_chk` arms a
//! checkpoint at the next trigger point (loop back-edge or function return);
//! the save is committed once its cycle cost has been paid, and a brownout
//! mid-save discards it. At `V <= v_off` the device dies and the next boot
//! replays from the last committed checkpoint (or from the start).

use crate::interp::{
    compile, Checkpoint, CompiledProgram, InputCase, Machine, PlatformModel, ProgramOutput,
};
use crate::lang::Program;

use super::trace::EnergyTrace;
use super::{EnergyError, SimError};

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitorSpec {
    pub capacitance_f: f64,
    pub v_on: f64,
    pub v_off: f64,
    pub v_chk: f64,
    pub source_resistance_ohm: f64,
    pub harvest_while_on: bool,
}

impl CapacitorSpec {
    /// Spec with the testbed's 3.3 V / 1.8 V hysteresis, 500 ohm source
    /// resistor, and a derived checkpoint-trigger voltage.
    pub fn new(capacitance_f: f64, plat: &PlatformModel) -> Self {
        let mut spec = CapacitorSpec {
            capacitance_f,
            v_on: 3.3,
            v_off: 1.8,
            v_chk: 0.0,
            source_resistance_ohm: 500.0,
            harvest_while_on: false,
        };
        spec.v_chk = spec.default_v_chk(plat);
        spec
    }

    pub fn from_uf(uf: f64, plat: &PlatformModel) -> Self {
        CapacitorSpec::new(uf * 1e-6, plat)
    }

    /// Smallest trigger voltage at which a started checkpoint reliably
    /// completes before brownout: the save cost plus two ticks of slack for
    /// reaching the next trigger point, converted to voltage drop at
    /// constant current.
    ///
    /// Derived from 1/2*C*(v_chk^2 - v_off^2) >= cost * I * V_mean / clock
    /// with V_mean = (v_chk + v_off)/2, which simplifies to
    /// v_chk = v_off + cost * I / (clock * C).
    pub fn default_v_chk(&self, plat: &PlatformModel) -> f64 {
        let guarded_cost = plat.checkpoint_cost_cycles as f64 + 2.0 * plat.cycles_per_ms();
        let dv = guarded_cost * plat.active_current_a / (plat.clock_hz as f64 * self.capacitance_f);
        (self.v_off + dv).min(self.v_on)
    }

    pub fn check(&self) -> Result<(), EnergyError> {
        if !positive(self.capacitance_f) {
            return Err(EnergyError::InvalidCapacitor(
                "capacitance must be > 0".into(),
            ));
        }
        if !positive(self.source_resistance_ohm) {
            return Err(EnergyError::InvalidCapacitor(
                "source resistance must be > 0".into(),
            ));
        }
        if !(0.0 <= self.v_off && self.v_off < self.v_chk && self.v_chk <= self.v_on) {
            return Err(EnergyError::InvalidCapacitor(format!(
                "need 0 <= v_off < v_chk <= v_on, got v_off={} v_chk={} v_on={}",
                self.v_off, self.v_chk, self.v_on
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEventKind {
    Boot,
    Checkpoint,
    Reboot,
    Complete,
}

impl SimEventKind {
    pub fn name(self) -> &'static str {
        match self {
            SimEventKind::Boot => "boot",
            SimEventKind::Checkpoint => "checkpoint",
            SimEventKind::Reboot => "reboot",
            SimEventKind::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub t_ms: u64,
    pub volts: f64,
    pub kind: SimEventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub output: Option<ProgramOutput>,
    /// Every executed cycle: program work, replays, saves, and restores.
    pub total_cycles: u64,
    /// Forward-progress cycles; equals the continuous-run count on completion.
    pub logical_cycles: u64,
    pub checkpoints: u64,
    pub reboots: u64,
    pub completed: bool,
    pub sim_time_ms: u64,
    pub event_log: Vec<SimEvent>,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub seed: u64,
    /// Logical-cycle watchdog; `None` disables the trap.
    pub watchdog_cycles: Option<u64>,
    /// Hard cap on simulated time; exceeding it counts as non-progressive.
    pub max_sim_ms: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            seed: 0,
            watchdog_cycles: None,
            max_sim_ms: 10_000_000,
        }
    }
}

pub fn simulate_intermittent(
    p: &Program,
    input: &InputCase,
    plat: &PlatformModel,
    cap: &CapacitorSpec,
    trace: &EnergyTrace,
    opts: &SimOptions,
) -> Result<SimResult, SimError> {
    let compiled = compile(p);
    simulate_compiled(&compiled, input, plat, cap, trace, opts)
}

struct PendingSave {
    snapshot: Checkpoint,
    remaining: u64,
}

pub fn simulate_compiled(
    compiled: &CompiledProgram,
    input: &InputCase,
    plat: &PlatformModel,
    cap: &CapacitorSpec,
    trace: &EnergyTrace,
    opts: &SimOptions,
) -> Result<SimResult, SimError> {
    cap.check().map_err(SimError::Setup)?;
    plat.check()
        .map_err(|e| SimError::Setup(EnergyError::InvalidCapacitor(e.to_string())))?;

    // a repeating trace that never reaches v_on can never boot the device
    if trace.repeat && trace.max_volts() <= cap.v_on {
        return Err(SimError::NonProgressive {
            at_ms: 0,
            reboots: 0,
            detail: format!(
                "trace peaks at {:.3} V, below the {:.3} V turn-on threshold",
                trace.max_volts(),
                cap.v_on
            ),
        });
    }

    let mut machine = Machine::new(compiled, input, plat, opts.seed);
    machine.set_watchdog(opts.watchdog_cycles);
    let initial = machine.snapshot();

    let dt_s = 1e-3;
    let tau = cap.source_resistance_ohm * cap.capacitance_f;
    let charge_k = dt_s / tau;
    let discharge_dv = plat.active_current_a * dt_s / cap.capacitance_f;
    let cycles_per_tick = plat.cycles_per_ms();

    let mut v = 0.0f64;
    let mut t_ms: u64 = 0;
    let mut on = false;
    let mut budget = 0.0f64;
    let mut total_cycles: u64 = 0;
    let mut checkpoints: u64 = 0;
    let mut reboots: u64 = 0;
    let mut events: Vec<SimEvent> = Vec::new();
    let mut last_checkpoint: Option<Checkpoint> = None;
    let mut pending_save: Option<PendingSave> = None;
    let mut pending_restore: u64 = 0;
    let mut needs_restore = false;
    let mut chk_armed = true;

    // non-progress detection
    let mut checkpoints_at_last_death: u64 = 0;
    let mut last_death_position: Option<(usize, u32, u64)> = None;
    let mut stuck_reboots: u32 = 0;

    loop {
        if t_ms >= opts.max_sim_ms {
            return Err(SimError::NonProgressive {
                at_ms: t_ms,
                reboots,
                detail: format!("no completion within {} simulated ms", opts.max_sim_ms),
            });
        }
        let vsrc = match trace.voltage_at(t_ms as f64) {
            Some(v) => v,
            None => return Err(SimError::TraceExhausted { at_ms: t_ms }),
        };

        if on {
            if v > cap.v_chk {
                chk_armed = true;
            }

            budget += cycles_per_tick;
            while budget > 0.0 && !machine.finished() {
                if pending_restore > 0 {
                    let pay = pending_restore.min(budget.ceil() as u64).max(1);
                    pending_restore -= pay;
                    budget -= pay as f64;
                    total_cycles += pay;
                    continue;
                }
                if let Some(save) = pending_save.as_mut() {
                    let pay = save.remaining.min(budget.ceil() as u64).max(1);
                    save.remaining -= pay;
                    budget -= pay as f64;
                    total_cycles += pay;
                    if save.remaining == 0 {
                        let done = pending_save.take().unwrap();
                        last_checkpoint = Some(done.snapshot);
                        checkpoints += 1;
                        chk_armed = false;
                        events.push(SimEvent {
                            t_ms,
                            volts: v,
                            kind: SimEventKind::Checkpoint,
                        });
                    }
                    continue;
                }
                let info = machine
                    .step()
                    .map_err(|fault| SimError::Fault { fault, at_ms: t_ms })?;
                budget -= info.cycles as f64;
                total_cycles += info.cycles;
                if info.trigger.is_some() && chk_armed && v <= cap.v_chk && !machine.finished() {
                    if plat.checkpoint_cost_cycles == 0 {
                        last_checkpoint = Some(machine.snapshot());
                        checkpoints += 1;
                        chk_armed = false;
                        events.push(SimEvent {
                            t_ms,
                            volts: v,
                            kind: SimEventKind::Checkpoint,
                        });
                    } else {
                        pending_save = Some(PendingSave {
                            snapshot: machine.snapshot(),
                            remaining: plat.checkpoint_cost_cycles,
                        });
                    }
                }
            }

            if machine.finished() {
                events.push(SimEvent {
                    t_ms,
                    volts: v,
                    kind: SimEventKind::Complete,
                });
                return Ok(SimResult {
                    output: Some(machine.output()),
                    total_cycles,
                    logical_cycles: machine.cycles(),
                    checkpoints,
                    reboots,
                    completed: true,
                    sim_time_ms: t_ms + 1,
                    event_log: events,
                });
            }

            // discharge (and harvest, when wired through the relay)
            let harvest = if cap.harvest_while_on {
                (vsrc - v) * charge_k
            } else {
                0.0
            };
            v = v + harvest - discharge_dv;
            if v <= cap.v_off {
                v = cap.v_off;
                on = false;
                pending_save = None;
                pending_restore = 0;
                budget = 0.0;
                reboots += 1;
                needs_restore = true;
                events.push(SimEvent {
                    t_ms,
                    volts: v,
                    kind: SimEventKind::Reboot,
                });

                let position = machine.position();
                let new_checkpoints = checkpoints - checkpoints_at_last_death;
                if new_checkpoints == 0 && last_death_position == Some(position) {
                    stuck_reboots += 1;
                } else {
                    stuck_reboots = 1;
                }
                checkpoints_at_last_death = checkpoints;
                last_death_position = Some(position);
                if new_checkpoints == 0 && stuck_reboots >= 3 {
                    return Err(SimError::NonProgressive {
                        at_ms: t_ms,
                        reboots,
                        detail: "3 consecutive reboots with no new checkpoint, \
                                 resuming at the same point"
                            .to_string(),
                    });
                }
            }
        } else {
            v += (vsrc - v) * charge_k;
            if v >= cap.v_on {
                on = true;
                chk_armed = true;
                budget = 0.0;
                events.push(SimEvent {
                    t_ms,
                    volts: v,
                    kind: SimEventKind::Boot,
                });
                if needs_restore {
                    match &last_checkpoint {
                        Some(ck) => {
                            machine.restore(ck);
                            pending_restore = plat.restore_cost_cycles;
                        }
                        None => {
                            machine.restore(&initial);
                        }
                    }
                    needs_restore = false;
                }
            }
        }

        t_ms += 1;
    }
}

/// Smallest candidate capacitance (farads) whose simulation completes.
pub fn min_viable_capacitor(
    p: &Program,
    input: &InputCase,
    plat: &PlatformModel,
    trace: &EnergyTrace,
    template: &CapacitorSpec,
    candidates_f: &[f64],
    opts: &SimOptions,
) -> Result<f64, EnergyError> {
    assert!(!candidates_f.is_empty(), "candidate list must be nonempty");
    assert!(
        candidates_f.windows(2).all(|w| w[0] < w[1]),
        "candidate list must be ascending"
    );
    let compiled = compile(p);
    for &c in candidates_f {
        let mut cap = template.clone();
        cap.capacitance_f = c;
        cap.v_chk = cap.default_v_chk(plat);
        match simulate_compiled(&compiled, input, plat, &cap, trace, opts) {
            Ok(res) if res.completed => return Ok(c),
            Ok(_) | Err(_) => continue,
        }
    }
    Err(EnergyError::NoViableCapacitor {
        tried: candidates_f.to_vec(),
    })
}

/// Serialize an event log in the `time_ms,volts,event` layout.
pub fn write_event_log_csv(events: &[SimEvent]) -> String {
    let mut out = String::from("time_ms,volts,event\n");
    for e in events {
        out.push_str(&format!("{},{:.6},{}\n", e.t_ms, e.volts, e.kind.name()));
    }
    out
}
