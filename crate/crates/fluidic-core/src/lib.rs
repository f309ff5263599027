//! Switch-level simulation and gate-level compilation for pneumatic logic
//! circuits built from soft membrane valves.
//!
//! The basic element is a two-chamber valve whose snapping membrane kinks
//! exactly one of two tubes at a time. A pressure differential across the
//! chambers flips the membrane between its `Up` and `Down` positions with
//! hysteresis (snap-through above one threshold, snap-back below another),
//! so a single valve acts as a complementary switch, and a bistable variant
//! doubles as a one-bit memory.
//!
//! On top of that element this crate provides:
//!
//! - [`pressure`]: kPa rails and the digital LOW/HIGH abstraction;
//! - [`valve`]: the hysteretic membrane state machine and quasi-static
//!   hysteresis sweeps;
//! - [`netlist`]: gate-level and valve-level circuit graphs plus the
//!   elaboration of each gate onto a single valve;
//! - [`sim`]: a deterministic quasi-static pressure-network solver with
//!   synchronous membrane updates, settling and oscillation detection;
//! - [`analysis`]: truth-table enumeration and bounded sequential
//!   equivalence checking;
//! - [`optimize`]: macro expansion and verified netlist rewrites that fuse
//!   gate pairs into INHIBIT gates and latch subcircuits into bistable
//!   set-reset elements;
//! - [`tolerance`]: Monte Carlo robustness analysis over valve-to-valve
//!   snap-pressure variation.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command-line
//! front end live in the companion `fluidic-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod netlist;
pub mod optimize;
pub mod pressure;
pub mod sim;
pub mod tolerance;
pub mod valve;

pub use analysis::{equiv_comb, equiv_seq, truth_table, EquivalenceReport, TruthTable};
pub use netlist::{elaborate, gate_count, CircuitGraph, GateKind, Level, NetId, ValveInstance};
pub use optimize::{expand_macros, optimize, RewriteReport};
pub use pressure::{kpa_to_logic, logic_to_kpa, LogicLevel, PressureSignal, RailConfig};
pub use sim::{run, Simulator, Stimulus, Waveform};
pub use tolerance::{margin_analysis, sample_specs, MarginReport, ToleranceModel};
pub use valve::{membrane_update, sweep_hysteresis, tube_states, MembraneState, ValveSpec};
