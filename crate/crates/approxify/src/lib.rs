//! Approxify: an energy-accuracy autotuner for intermittently powered programs.
//!
//! The pipeline parses an ApproxC source file, enumerates its loops and
//! functions, applies loop-perforation and approximate-memoization rewrites,
//! simulates execution under a harvested-voltage trace with capacitor-backed
//! checkpointing, and sweeps approximation intensities to find the
//! configuration minimizing combined output error and checkpoint cost.
//!
//! Modules:
//! - [`lang`] — ApproxC front-end (parse, validate, pretty-print)
//! - [`interp`] — deterministic interpreter with cycle accounting and
//!   snapshot/restore
//! - [`energy`] — capacitor/trace intermittent-execution simulator
//! - [`metrics`] — output error classes and the checkpoint ratio
//! - [`transform`] — block enumeration and the four approximation rewrites
//! - [`search`] — safety probing, the intensity sweep, and selection
//! - [`pipeline`] — configuration, benchmark corpus, end-to-end driver

pub mod energy;
pub mod interp;
pub mod lang;
pub mod metrics;
pub mod pipeline;
pub mod search;
pub mod transform;
