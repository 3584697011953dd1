//! Per-operation cycle costs and electrical draw of the simulated device.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cycle cost per executed node kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleCosts {
    pub literal: u64,
    pub load: u64,
    pub store: u64,
    pub int_arith: u64,
    pub float_arith: u64,
    pub compare: u64,
    pub branch: u64,
    pub array_access: u64,
    pub call: u64,
    pub ret: u64,
    pub intrinsic: u64,
    pub emit: u64,
}

impl Default for CycleCosts {
    fn default() -> Self {
        CycleCosts {
            literal: 1,
            load: 1,
            store: 1,
            int_arith: 1,
            float_arith: 3,
            compare: 1,
            branch: 1,
            array_access: 2,
            call: 5,
            ret: 2,
            intrinsic: 10,
            emit: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlatformModel {
    pub name: String,
    /// Virtual clock; the intermittent simulator executes `clock_hz / 1000`
    /// cycles per 1 ms tick.
    pub clock_hz: u64,
    /// Current drawn while the device runs.
    pub active_current_a: f64,
    pub cycle_costs: CycleCosts,
    pub checkpoint_cost_cycles: u64,
    pub restore_cost_cycles: u64,
    pub memo_lookup_base_cycles: u64,
    pub memo_scan_cycles_per_entry: u64,
    pub rng_draw_cycles: u64,
}

impl Default for PlatformModel {
    fn default() -> Self {
        PlatformModel::cortex_m()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlatformError {
    #[error("unknown platform preset `{0}` (expected cortex-m or msp430)")]
    UnknownPreset(String),
    #[error("invalid platform model: {0}")]
    Invalid(String),
}

impl PlatformModel {
    /// STM32-style Cortex-M profile: 100 kHz virtual clock, 12 mA active draw.
    pub fn cortex_m() -> Self {
        PlatformModel {
            name: "cortex-m".to_string(),
            clock_hz: 100_000,
            active_current_a: 0.012,
            cycle_costs: CycleCosts::default(),
            checkpoint_cost_cycles: 100,
            restore_cost_cycles: 50,
            memo_lookup_base_cycles: 8,
            memo_scan_cycles_per_entry: 2,
            rng_draw_cycles: 4,
        }
    }

    /// MSP430-style profile: same virtual clock, 2 mA active draw.
    pub fn msp430() -> Self {
        PlatformModel {
            name: "msp430".to_string(),
            active_current_a: 0.002,
            ..PlatformModel::cortex_m()
        }
    }

    pub fn preset(name: &str) -> Result<Self, PlatformError> {
        match name {
            "cortex-m" => Ok(PlatformModel::cortex_m()),
            "msp430" => Ok(PlatformModel::msp430()),
            other => Err(PlatformError::UnknownPreset(other.to_string())),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, PlatformError> {
        let model: PlatformModel =
            serde_json::from_str(json).map_err(|e| PlatformError::Invalid(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    pub fn check(&self) -> Result<(), PlatformError> {
        if self.clock_hz == 0 {
            return Err(PlatformError::Invalid("clock_hz must be > 0".to_string()));
        }
        if !(self.active_current_a.is_finite() && self.active_current_a > 0.0) {
            return Err(PlatformError::Invalid(
                "active_current_a must be > 0".to_string(),
            ));
        }
        let c = &self.cycle_costs;
        let named = [
            ("literal", c.literal),
            ("load", c.load),
            ("store", c.store),
            ("int_arith", c.int_arith),
            ("float_arith", c.float_arith),
            ("compare", c.compare),
            ("branch", c.branch),
            ("array_access", c.array_access),
            ("call", c.call),
            ("ret", c.ret),
            ("intrinsic", c.intrinsic),
            ("emit", c.emit),
            ("memo_lookup_base_cycles", self.memo_lookup_base_cycles),
            (
                "memo_scan_cycles_per_entry",
                self.memo_scan_cycles_per_entry,
            ),
            ("rng_draw_cycles", self.rng_draw_cycles),
        ];
        for (name, v) in named {
            if v == 0 {
                return Err(PlatformError::Invalid(format!(
                    "cost `{name}` must be >= 1"
                )));
            }
        }
        Ok(())
    }

    pub fn cycles_per_ms(&self) -> f64 {
        self.clock_hz as f64 / 1000.0
    }
}
