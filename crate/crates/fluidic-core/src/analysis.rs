//! Digital verification: truth-table enumeration for combinational
//! circuits and bounded-sequence equivalence for sequential ones.
//!
//! Truth-table rows each start from the reset state so hysteresis cannot
//! leak between rows. Sequential comparison enumerates every input
//! sequence of a given length, settling between steps, and compares logic
//! levels rather than raw pressures: circuits with different rail routing
//! but identical logic are equivalent.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::netlist::{elaborate, CircuitGraph, ElaborateError, Level, NetId};
use crate::pressure::{logic_to_kpa, LogicLevel, PressureSignal};
use crate::sim::{settle, SettleOutcome, SimError, Simulator};
use crate::valve::Stability;

/// Default bound for sequence equivalence: 4^6 = 4096 runs for a
/// two-input circuit.
pub const DEFAULT_SEQUENCE_LENGTH: usize = 6;

/// Default per-step settling budget in ticks.
pub const DEFAULT_SETTLE_BUDGET: u64 = 256;

/// Enumerated behavior of a combinational circuit: one row per input
/// combination, in lexicographic order (2^k rows for k inputs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub rows: Vec<TruthRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub inputs: Vec<bool>,
    pub outputs: Vec<LogicLevel>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// The circuit is not combinational: it holds a bistable valve, or a
    /// row oscillated or conflicted.
    NotCombinational(String),
    /// A row failed to settle within the budget.
    BudgetExceeded { row: usize },
    /// The two circuits declare different input or output names.
    InterfaceMismatch(String),
    Elaborate(ElaborateError),
    Sim(SimError),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::NotCombinational(msg) => write!(f, "not combinational: {msg}"),
            AnalysisError::BudgetExceeded { row } => {
                write!(f, "row {row} exceeded the settling budget")
            }
            AnalysisError::InterfaceMismatch(msg) => write!(f, "interface mismatch: {msg}"),
            AnalysisError::Elaborate(e) => write!(f, "{e}"),
            AnalysisError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for AnalysisError {}

impl From<ElaborateError> for AnalysisError {
    fn from(e: ElaborateError) -> Self {
        AnalysisError::Elaborate(e)
    }
}

impl From<SimError> for AnalysisError {
    fn from(e: SimError) -> Self {
        AnalysisError::Sim(e)
    }
}

/// How an equivalence verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exhaustive truth-table comparison.
    Exhaustive,
    /// All input sequences of this length, settling between steps.
    BoundedSequence(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exhaustive => write!(f, "Exhaustive"),
            Method::BoundedSequence(l) => write!(f, "BoundedSequence({l})"),
        }
    }
}

/// A replayable witness of inequivalence: the input sequence and both
/// circuits' outputs at the diverging step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// Input names, sorted; each sequence entry assigns them in order.
    pub input_names: Vec<String>,
    pub sequence: Vec<Vec<bool>>,
    /// Index into `sequence` where the outputs diverge.
    pub step: usize,
    /// Output names, sorted; the two output rows assign them in order.
    pub output_names: Vec<String>,
    pub left_outputs: Vec<LogicLevel>,
    pub right_outputs: Vec<LogicLevel>,
    /// Set when a circuit failed to settle at the diverging step instead
    /// of producing different logic.
    pub non_settling: Option<String>,
}

/// Verdict plus the method that produced it. A report claims equivalence
/// only when every compared row or sequence matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub method: Method,
    pub counterexample: Option<Counterexample>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.counterexample {
            None => write!(f, "Equivalent method={}", self.method),
            Some(c) => {
                write!(f, "Counterexample method={} step={} inputs=", self.method, c.step)?;
                for (i, step) in c.sequence.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    for (name, bit) in c.input_names.iter().zip(step) {
                        write!(f, "{name}={}", u8::from(*bit))?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// The circuit elaborated to valve level, with name-resolved I/O.
struct Prepared {
    graph: CircuitGraph,
    inputs: Vec<(String, NetId)>,
    outputs: Vec<(String, NetId)>,
}

fn prepare(graph: &CircuitGraph) -> Result<Prepared, AnalysisError> {
    let elaborated = match graph.level() {
        Level::Gate => elaborate(graph)?,
        Level::Valve => graph.clone(),
    };
    let inputs = elaborated
        .inputs()
        .iter()
        .map(|&n| (elaborated.net_name(n).to_string(), n))
        .collect();
    let outputs = elaborated
        .outputs()
        .iter()
        .map(|&n| (elaborated.net_name(n).to_string(), n))
        .collect();
    Ok(Prepared {
        graph: elaborated,
        inputs,
        outputs,
    })
}

fn require_combinational(p: &Prepared) -> Result<(), AnalysisError> {
    for v in p.graph.valves() {
        if v.spec.stability == Stability::Bistable {
            return Err(AnalysisError::NotCombinational(v.name.clone()));
        }
    }
    Ok(())
}

fn rail_inputs(
    p: &Prepared,
    bits: &[bool],
) -> Result<BTreeMap<NetId, PressureSignal>, AnalysisError> {
    let rails = p.graph.rails();
    let mut map = BTreeMap::new();
    for ((_, net), bit) in p.inputs.iter().zip(bits) {
        let level = if *bit { LogicLevel::High } else { LogicLevel::Low };
        let pressure = logic_to_kpa(level, rails)
            .map_err(|_| AnalysisError::NotCombinational("bad rails".into()))?;
        map.insert(*net, pressure);
    }
    Ok(map)
}

/// Applies one input row from reset and reads the settled output logic.
fn evaluate_row(
    p: &Prepared,
    bits: &[bool],
    budget: u64,
    row: usize,
) -> Result<Vec<LogicLevel>, AnalysisError> {
    let mut sim = Simulator::new(&p.graph)?;
    let inputs = rail_inputs(p, bits)?;
    let (outcome, solution) = settle(&mut sim, &inputs, budget)?;
    match outcome {
        SettleOutcome::Settled { .. } => {}
        SettleOutcome::Oscillating { period } => {
            return Err(AnalysisError::NotCombinational(alloc::format!(
                "row {row} oscillates with period {period}"
            )))
        }
        SettleOutcome::Conflict => {
            return Err(AnalysisError::NotCombinational(alloc::format!(
                "row {row} has a net conflict"
            )))
        }
        SettleOutcome::BudgetExceeded => return Err(AnalysisError::BudgetExceeded { row }),
    }
    let logic = sim.logic(&solution);
    Ok(p.outputs.iter().map(|(_, net)| logic[net.index()]).collect())
}

fn bits_of(index: usize, width: usize) -> Vec<bool> {
    (0..width).map(|j| (index >> (width - 1 - j)) & 1 == 1).collect()
}

/// Enumerates all 2^k input rows of a combinational circuit, each from
/// reset, and records the settled output logic.
pub fn truth_table(graph: &CircuitGraph, settle_budget: u64) -> Result<TruthTable, AnalysisError> {
    let p = prepare(graph)?;
    require_combinational(&p)?;
    let k = p.inputs.len();
    let mut rows = Vec::with_capacity(1 << k);
    for index in 0..(1usize << k) {
        let bits = bits_of(index, k);
        let outputs = evaluate_row(&p, &bits, settle_budget, index)?;
        rows.push(TruthRow {
            inputs: bits,
            outputs,
        });
    }
    Ok(TruthTable {
        inputs: p.inputs.iter().map(|(n, _)| n.clone()).collect(),
        outputs: p.outputs.iter().map(|(n, _)| n.clone()).collect(),
        rows,
    })
}

/// Sorts the prepared I/O by name so two circuits enumerate identically.
fn sorted_interface(p: &mut Prepared) {
    p.inputs.sort_by(|a, b| a.0.cmp(&b.0));
    p.outputs.sort_by(|a, b| a.0.cmp(&b.0));
}

fn check_interfaces(a: &Prepared, b: &Prepared) -> Result<(), AnalysisError> {
    let names = |v: &[(String, NetId)]| v.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    if names(&a.inputs) != names(&b.inputs) {
        return Err(AnalysisError::InterfaceMismatch(alloc::format!(
            "inputs {:?} vs {:?}",
            names(&a.inputs),
            names(&b.inputs)
        )));
    }
    if names(&a.outputs) != names(&b.outputs) {
        return Err(AnalysisError::InterfaceMismatch(alloc::format!(
            "outputs {:?} vs {:?}",
            names(&a.outputs),
            names(&b.outputs)
        )));
    }
    Ok(())
}

/// Exhaustive combinational equivalence: compares settled output logic on
/// every input row. Both circuits must be combinational and share input
/// and output names.
pub fn equiv_comb(
    g1: &CircuitGraph,
    g2: &CircuitGraph,
) -> Result<EquivalenceReport, AnalysisError> {
    let mut a = prepare(g1)?;
    let mut b = prepare(g2)?;
    sorted_interface(&mut a);
    sorted_interface(&mut b);
    check_interfaces(&a, &b)?;
    require_combinational(&a)?;
    require_combinational(&b)?;

    let k = a.inputs.len();
    for index in 0..(1usize << k) {
        let bits = bits_of(index, k);
        let left = evaluate_row(&a, &bits, DEFAULT_SETTLE_BUDGET, index)?;
        let right = evaluate_row(&b, &bits, DEFAULT_SETTLE_BUDGET, index)?;
        if left != right {
            return Ok(EquivalenceReport {
                method: Method::Exhaustive,
                counterexample: Some(Counterexample {
                    input_names: a.inputs.iter().map(|(n, _)| n.clone()).collect(),
                    sequence: alloc::vec![bits],
                    step: 0,
                    output_names: a.outputs.iter().map(|(n, _)| n.clone()).collect(),
                    left_outputs: left,
                    right_outputs: right,
                    non_settling: None,
                }),
            });
        }
    }
    Ok(EquivalenceReport {
        method: Method::Exhaustive,
        counterexample: None,
    })
}

enum StepResult {
    Outputs(Vec<LogicLevel>),
    NonSettling(String),
}

fn step_circuit(
    p: &Prepared,
    sim: &mut Simulator<'_>,
    bits: &[bool],
    budget: u64,
) -> Result<StepResult, AnalysisError> {
    let inputs = rail_inputs(p, bits)?;
    let (outcome, solution) = settle(sim, &inputs, budget)?;
    match outcome {
        SettleOutcome::Settled { .. } => {
            let logic = sim.logic(&solution);
            Ok(StepResult::Outputs(
                p.outputs.iter().map(|(_, net)| logic[net.index()]).collect(),
            ))
        }
        SettleOutcome::Oscillating { period } => Ok(StepResult::NonSettling(alloc::format!(
            "oscillates with period {period}"
        ))),
        SettleOutcome::Conflict => Ok(StepResult::NonSettling("net conflict".to_string())),
        SettleOutcome::BudgetExceeded => {
            Ok(StepResult::NonSettling("settling budget exceeded".to_string()))
        }
    }
}

/// Bounded sequential equivalence: drives both circuits from reset with
/// every input sequence of length `max_len`, settling between steps, and
/// compares output logic at each step (which also covers all shorter
/// sequences). Bistable initial states come from the netlists.
pub fn equiv_seq(
    g1: &CircuitGraph,
    g2: &CircuitGraph,
    max_len: usize,
) -> Result<EquivalenceReport, AnalysisError> {
    equiv_seq_with_filter(g1, g2, max_len, &|_| true)
}

/// [`equiv_seq`] over the sequences whose every step satisfies `allowed`
/// (input bits in sorted-name order). Used for rewrite-rule obligations
/// that exclude specific inputs.
pub(crate) fn equiv_seq_with_filter(
    g1: &CircuitGraph,
    g2: &CircuitGraph,
    max_len: usize,
    allowed: &dyn Fn(&[bool]) -> bool,
) -> Result<EquivalenceReport, AnalysisError> {
    let mut a = prepare(g1)?;
    let mut b = prepare(g2)?;
    sorted_interface(&mut a);
    sorted_interface(&mut b);
    check_interfaces(&a, &b)?;

    let method = Method::BoundedSequence(max_len);
    let k = a.inputs.len();
    let symbols = 1usize << k;
    let total = symbols.pow(max_len as u32);

    'sequences: for seq_index in 0..total {
        let mut symbol = seq_index;
        let mut sequence = Vec::with_capacity(max_len);
        for _ in 0..max_len {
            let bits = bits_of(symbol % symbols, k);
            if !allowed(&bits) {
                continue 'sequences;
            }
            sequence.push(bits);
            symbol /= symbols;
        }

        let mut sim_a = Simulator::new(&a.graph)?;
        let mut sim_b = Simulator::new(&b.graph)?;
        for step in 0..max_len {
            let left = step_circuit(&a, &mut sim_a, &sequence[step], DEFAULT_SETTLE_BUDGET)?;
            let right = step_circuit(&b, &mut sim_b, &sequence[step], DEFAULT_SETTLE_BUDGET)?;
            let (left_outputs, right_outputs, non_settling) = match (left, right) {
                (StepResult::Outputs(l), StepResult::Outputs(r)) => {
                    if l == r {
                        continue;
                    }
                    (l, r, None)
                }
                (StepResult::NonSettling(msg), StepResult::Outputs(r)) => {
                    (Vec::new(), r, Some(alloc::format!("left circuit {msg}")))
                }
                (StepResult::Outputs(l), StepResult::NonSettling(msg)) => {
                    (l, Vec::new(), Some(alloc::format!("right circuit {msg}")))
                }
                (StepResult::NonSettling(m1), StepResult::NonSettling(m2)) => (
                    Vec::new(),
                    Vec::new(),
                    Some(alloc::format!("left circuit {m1}; right circuit {m2}")),
                ),
            };
            return Ok(EquivalenceReport {
                method,
                counterexample: Some(Counterexample {
                    input_names: a.inputs.iter().map(|(n, _)| n.clone()).collect(),
                    sequence: sequence[..=step].to_vec(),
                    step,
                    output_names: a.outputs.iter().map(|(n, _)| n.clone()).collect(),
                    left_outputs,
                    right_outputs,
                    non_settling,
                }),
            });
        }
    }
    Ok(EquivalenceReport {
        method,
        counterexample: None,
    })
}
