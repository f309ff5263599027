//! File formats and command implementations for the fluidic logic
//! toolkit.
//!
//! The binary is a thin shell: every subcommand body lives here as a
//! function from input text to output text plus an exit code, so tests
//! and other tools get byte-identical results without spawning a process.
//!
//! Exit code convention: 0 success, 1 verification or logic failure
//! (net conflict, counterexample, rejected rewrite), 2 usage or parse
//! errors.

pub mod export;
pub mod parser;
pub mod stimulus;

use fluidic_core::analysis::{equiv_comb, equiv_seq, truth_table, AnalysisError, DEFAULT_SEQUENCE_LENGTH};
use fluidic_core::netlist::{elaborate, CircuitGraph, GateKind, Level};
use fluidic_core::optimize::optimize;
use fluidic_core::pressure::PressureSignal;
use fluidic_core::sim::{run, RunStatus};
use fluidic_core::tolerance::{margin_analysis, MarginCheck, ToleranceModel};
use fluidic_core::valve::{sweep_hysteresis, triangle_ramp, Stability, ValveSpec};
use thiserror::Error;

pub use parser::{parse_netlist, serialize_netlist, ParseError};
pub use stimulus::parse_stimulus;

/// Ticks to hold each counterexample step when rendering replay stimuli.
pub const REPLAY_STEP_GAP: u64 = 32;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input files; exit code 2.
    #[error("{0}")]
    Parse(#[from] ParseError),
    /// Wrong invocation or ill-suited circuit; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The analysis itself reports a logic failure; exit code 1.
    #[error("{0}")]
    Logic(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Logic(_) => 1,
        }
    }
}

/// A finished command: the artifact for stdout (or `--out`) and the
/// process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub payload: String,
    pub exit_code: i32,
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// `sim`: run a stimulus and emit the waveform CSV. Exit 1 on conflict.
pub fn cmd_sim(netlist: &str, stimulus: &str, max_ticks: u64) -> Result<CommandOutput, CliError> {
    let graph = parse_netlist(netlist)?;
    let valve_level = match graph.level() {
        Level::Gate => elaborate(&graph).map_err(usage)?,
        Level::Valve => graph,
    };
    let stim = parse_stimulus(stimulus, &valve_level)?;
    let wave = run(&valve_level, &stim, max_ticks).map_err(usage)?;
    let exit_code = match wave.status {
        RunStatus::Conflict { .. } => 1,
        _ => 0,
    };
    Ok(CommandOutput {
        payload: export::waveform_csv(&valve_level, &wave),
        exit_code,
    })
}

/// `truth`: enumerate the truth table as CSV.
pub fn cmd_truth(netlist: &str, settle_budget: u64) -> Result<CommandOutput, CliError> {
    let graph = parse_netlist(netlist)?;
    let table = truth_table(&graph, settle_budget).map_err(|e| match e {
        AnalysisError::NotCombinational(_) | AnalysisError::BudgetExceeded { .. } => {
            CliError::Logic(e.to_string())
        }
        other => usage(other),
    })?;
    Ok(CommandOutput {
        payload: export::truth_csv(&table),
        exit_code: 0,
    })
}

/// `opt` results: the (possibly reverted) netlist, the text report, and
/// the per-rewrite CSV.
#[derive(Debug, Clone)]
pub struct OptOutput {
    pub netlist: String,
    pub report_text: String,
    pub report_csv: String,
    pub exit_code: i32,
}

/// `opt`: expand, rewrite, verify; exit 1 when verification rejected the
/// rewrite and the original was kept.
pub fn cmd_opt(netlist: &str) -> Result<OptOutput, CliError> {
    let graph = parse_netlist(netlist)?;
    let (optimized, report) = optimize(&graph).map_err(usage)?;
    Ok(OptOutput {
        netlist: serialize_netlist(&optimized),
        report_text: export::rewrite_report_text(&report),
        report_csv: export::rewrite_report_csv(&report),
        exit_code: if report.succeeded { 0 } else { 1 },
    })
}

/// `verify` results: the verdict report and, for counterexamples, a
/// replayable stimulus file.
#[derive(Debug, Clone)]
pub struct VerifyOutput {
    pub report: String,
    pub counterexample_stimulus: Option<String>,
    pub exit_code: i32,
}

fn is_sequential(graph: &CircuitGraph) -> bool {
    graph.gates().iter().any(|g| {
        matches!(g.kind, GateKind::SrLatch | GateKind::DLatch3 | GateKind::DLatch6)
    }) || graph
        .valves()
        .iter()
        .any(|v| v.spec.stability == Stability::Bistable)
}

/// `verify`: equivalence of two netlists. `seq` forces bounded-sequence
/// checking at that length; otherwise the method is exhaustive for
/// combinational pairs and bounded (default length) when either side
/// holds state. Exit 1 on a counterexample.
pub fn cmd_verify(
    netlist1: &str,
    netlist2: &str,
    seq: Option<usize>,
) -> Result<VerifyOutput, CliError> {
    let g1 = parse_netlist(netlist1)?;
    let g2 = parse_netlist(netlist2)?;
    let report = match seq {
        Some(len) => equiv_seq(&g1, &g2, len).map_err(usage)?,
        None if is_sequential(&g1) || is_sequential(&g2) => {
            equiv_seq(&g1, &g2, DEFAULT_SEQUENCE_LENGTH).map_err(usage)?
        }
        None => equiv_comb(&g1, &g2).map_err(usage)?,
    };
    let counterexample_stimulus = report
        .counterexample
        .as_ref()
        .map(|c| stimulus::render_bit_sequence(&c.input_names, &c.sequence, REPLAY_STEP_GAP));
    Ok(VerifyOutput {
        exit_code: if report.is_equivalent() { 0 } else { 1 },
        report: export::verdict_text(&report),
        counterexample_stimulus,
    })
}

/// `sweep`: quasi-static hysteresis curve of a single valve as CSV.
pub fn cmd_sweep(
    snap_through: f64,
    snap_back: f64,
    supply: f64,
    step: f64,
) -> Result<CommandOutput, CliError> {
    let spec = ValveSpec::new("sweep", Stability::Monostable, snap_through, snap_back)
        .map_err(usage)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(CliError::Usage(format!("step must be positive, got {step}")));
    }
    if !(supply.is_finite() && supply > 0.0) {
        return Err(CliError::Usage(format!("supply must be positive, got {supply}")));
    }
    let ramp = triangle_ramp(supply, step);
    let points = sweep_hysteresis(&spec, supply, &ramp).map_err(usage)?;
    Ok(CommandOutput {
        payload: export::sweep_csv(&points),
        exit_code: 0,
    })
}

/// Options for `margin`; `stimulus` and `disturb` are mutually exclusive
/// refinements of the default truth-table check.
#[derive(Debug, Clone, Default)]
pub struct MarginOptions {
    pub p_high_kpa: f64,
    pub trials: u64,
    pub seed: u64,
    pub stimulus: Option<String>,
    pub disturb_kpa: Option<f64>,
}

/// `margin` results: the key=value summary and the per-trial CSV.
#[derive(Debug, Clone)]
pub struct MarginOutput {
    pub text: String,
    pub csv: String,
    pub exit_code: i32,
}

/// `margin`: Monte Carlo actuation analysis at an operating pressure.
pub fn cmd_margin(netlist: &str, options: &MarginOptions) -> Result<MarginOutput, CliError> {
    let graph = parse_netlist(netlist)?;
    let valve_level = match graph.level() {
        Level::Gate => elaborate(&graph).map_err(usage)?,
        Level::Valve => graph,
    };
    let check = match (&options.stimulus, options.disturb_kpa) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--stimulus and --disturb are mutually exclusive".into(),
            ))
        }
        (None, Some(magnitude_kpa)) => MarginCheck::Disturbance { magnitude_kpa },
        (Some(text), None) => MarginCheck::Stimulus(parse_stimulus(text, &valve_level)?),
        (None, None) => MarginCheck::TruthTable,
    };
    let p_high = PressureSignal::new(options.p_high_kpa).map_err(usage)?;
    let model = ToleranceModel::with_seed(options.seed);
    let report =
        margin_analysis(&valve_level, &model, p_high, options.trials, &check).map_err(usage)?;
    Ok(MarginOutput {
        text: export::margin_text(&report),
        csv: export::margin_csv(&report),
        exit_code: 0,
    })
}
