//! Quasi-static pressure-network solver with synchronous membrane updates.
//!
//! Each tick resolves the net pressures implied by the current membrane
//! positions, then updates every membrane simultaneously from its chamber
//! differential (unit-delay semantics). An open tube is an ideal pressure
//! connection between its two end nets; a kinked tube disconnects them.
//! Connected components take the pressure of their unique source; sealed
//! components hold their previous pressure (ideal trapped air volume);
//! components joining sources at different pressures are conflicts, which
//! are reported in-band and read as UNDEFINED logic while the run
//! continues.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::netlist::{CircuitGraph, Dsu, Level, NetId};
use crate::pressure::{kpa_to_logic, LogicLevel, PressureSignal};
use crate::valve::{membrane_update, tube_states, MembraneState, TubeState};

/// Window of recent global states examined for settling and cycles.
pub const CYCLE_WINDOW: usize = 256;

/// Default tick budget for [`run`].
pub const DEFAULT_MAX_TICKS: u64 = 10_000;

/// How a net got its pressure this tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetStatus {
    /// Connected to exactly one source pressure.
    Driven,
    /// Sealed; holds its previous pressure.
    Trapped,
    /// Connected to sources at different pressures.
    Conflict,
}

/// Pressures and statuses of every net, indexed by [`NetId`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetSolution {
    pub pressures: Vec<f64>,
    pub status: Vec<NetStatus>,
}

impl NetSolution {
    pub fn pressure(&self, net: NetId) -> f64 {
        self.pressures[net.index()]
    }

    pub fn status_of(&self, net: NetId) -> NetStatus {
        self.status[net.index()]
    }

    pub fn has_conflict(&self) -> bool {
        self.status.contains(&NetStatus::Conflict)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// Simulation needs a valve-level graph; elaborate first.
    WrongLevel,
    InvalidGraph(usize),
    /// The stimulus left a declared input unassigned.
    MissingInput(String),
    /// Stimulus must start at tick 0 with strictly increasing ticks.
    BadStimulus(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::WrongLevel => write!(f, "simulation requires a valve-level graph"),
            SimError::InvalidGraph(n) => write!(f, "graph fails validation with {n} violations"),
            SimError::MissingInput(name) => write!(f, "input {name} not assigned"),
            SimError::BadStimulus(msg) => write!(f, "bad stimulus: {msg}"),
        }
    }
}

impl core::error::Error for SimError {}

/// Time-indexed input assignments. Values hold between steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stimulus {
    pub steps: Vec<StimulusStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusStep {
    pub tick: u64,
    pub values: BTreeMap<NetId, PressureSignal>,
}

impl Stimulus {
    /// A single assignment applied from tick 0 onward.
    pub fn constant(values: BTreeMap<NetId, PressureSignal>) -> Self {
        Stimulus {
            steps: vec![StimulusStep { tick: 0, values }],
        }
    }

    fn validate(&self, graph: &CircuitGraph) -> Result<(), SimError> {
        if self.steps.is_empty() {
            if graph.inputs().is_empty() {
                return Ok(());
            }
            return Err(SimError::BadStimulus("no steps for a circuit with inputs".into()));
        }
        if self.steps[0].tick != 0 {
            return Err(SimError::BadStimulus("first step must be at tick 0".into()));
        }
        for w in self.steps.windows(2) {
            if w[1].tick <= w[0].tick {
                return Err(SimError::BadStimulus("ticks must be strictly increasing".into()));
            }
        }
        for input in graph.inputs() {
            if !self.steps[0].values.contains_key(&input) {
                return Err(SimError::MissingInput(graph.net_name(input).to_string()));
            }
        }
        Ok(())
    }

    /// Tick of the last step; 0 when empty.
    pub fn last_change(&self) -> u64 {
        self.steps.last().map(|s| s.tick).unwrap_or(0)
    }
}

/// One simulated tick: the state of every net and membrane before the
/// synchronous update.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub solution: NetSolution,
    pub logic: Vec<LogicLevel>,
    pub membranes: Vec<MembraneState>,
}

/// Terminal status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Fixed point: two identical consecutive global states, reached at
    /// this tick.
    Settled { tick: u64 },
    /// The global state repeats with this period (in ticks). Tick periods
    /// are a unit-delay model artifact, not a physical frequency.
    Oscillating { period: u64 },
    /// A net conflict was first seen at this tick.
    Conflict { tick: u64 },
    /// Neither settled nor cycled within the budget.
    Truncated { max_ticks: u64 },
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Settled { tick } => write!(f, "Settled tick={tick}"),
            RunStatus::Oscillating { period } => write!(f, "Oscillating period={period}"),
            RunStatus::Conflict { tick } => write!(f, "Conflict tick={tick}"),
            RunStatus::Truncated { max_ticks } => write!(f, "Truncated max_ticks={max_ticks}"),
        }
    }
}

/// Full simulation trace: one record per tick plus the terminal status.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub records: Vec<TickRecord>,
    pub status: RunStatus,
}

impl Waveform {
    pub fn last(&self) -> &TickRecord {
        self.records.last().expect("waveform has at least one tick")
    }
}

/// Tuning knobs for a simulator instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// When set, a net sealed for this many consecutive ticks leaks to
    /// atmospheric pressure. Off by default: trapped nets hold their
    /// pressure indefinitely (ideal airtight seal).
    pub leak_after_ticks: Option<u64>,
}

/// Owns the running state of one circuit: membrane positions and the
/// trapped-pressure memory. Deterministic and single-threaded; independent
/// simulators never share state.
#[derive(Debug, Clone)]
pub struct Simulator<'g> {
    graph: &'g CircuitGraph,
    options: SimOptions,
    states: Vec<MembraneState>,
    previous: Vec<f64>,
    ever_driven: Vec<bool>,
    trapped_streak: Vec<u64>,
}

impl<'g> Simulator<'g> {
    /// Requires a validated valve-level graph.
    pub fn new(graph: &'g CircuitGraph) -> Result<Self, SimError> {
        Simulator::with_options(graph, SimOptions::default())
    }

    pub fn with_options(graph: &'g CircuitGraph, options: SimOptions) -> Result<Self, SimError> {
        if graph.level() != Level::Valve {
            return Err(SimError::WrongLevel);
        }
        let violations = graph.validate();
        if !violations.is_empty() {
            return Err(SimError::InvalidGraph(violations.len()));
        }
        Ok(Simulator {
            graph,
            options,
            states: graph.valves().iter().map(|v| v.initial).collect(),
            previous: vec![0.0; graph.net_count()],
            ever_driven: vec![false; graph.net_count()],
            trapped_streak: vec![0; graph.net_count()],
        })
    }

    pub fn graph(&self) -> &CircuitGraph {
        self.graph
    }

    pub fn membranes(&self) -> &[MembraneState] {
        &self.states
    }

    /// Resolves net pressures for the current membrane positions without
    /// advancing state.
    pub fn resolve(&self, inputs: &BTreeMap<NetId, PressureSignal>) -> NetSolution {
        let n = self.graph.net_count();
        let mut dsu = Dsu::new(n);
        for (valve, state) in self.graph.valves().iter().zip(&self.states) {
            let tubes = tube_states(*state);
            if tubes.top == TubeState::Open {
                dsu.union(valve.ports.top_in.index(), valve.ports.top_out.index());
            }
            if tubes.bottom == TubeState::Open {
                dsu.union(valve.ports.bot_in.index(), valve.ports.bot_out.index());
            }
        }

        // Distinct source pressures per component: (lowest, highest, seen).
        let mut span: Vec<Option<(f64, f64)>> = vec![None; n];
        let note = |root: usize, p: f64, span: &mut Vec<Option<(f64, f64)>>| {
            span[root] = Some(match span[root] {
                None => (p, p),
                Some((lo, hi)) => (if p < lo { p } else { lo }, if p > hi { p } else { hi }),
            });
        };
        for (net, pressure) in self.graph.fixed_sources() {
            note(dsu_find(&mut dsu, net), pressure.kpa(), &mut span);
        }
        for net in self.graph.inputs() {
            if let Some(p) = inputs.get(&net) {
                note(dsu_find(&mut dsu, net), p.kpa(), &mut span);
            }
        }

        let mut pressures = vec![0.0; n];
        let mut status = vec![NetStatus::Trapped; n];
        for i in 0..n {
            let root = dsu.find(i);
            match span[root] {
                None => {
                    // Sealed: keep the net's own previous pressure.
                    pressures[i] = self.previous[i];
                    status[i] = NetStatus::Trapped;
                }
                Some((lo, hi)) if lo == hi => {
                    pressures[i] = lo;
                    status[i] = NetStatus::Driven;
                }
                Some((_, hi)) => {
                    // Conflict: logic reads UNDEFINED; the highest source
                    // pressure propagates so the run can continue.
                    pressures[i] = hi;
                    status[i] = NetStatus::Conflict;
                }
            }
        }
        NetSolution { pressures, status }
    }

    /// Digital reading of each net under the graph's rails. Conflicts and
    /// never-driven sealed nets read UNDEFINED.
    pub fn logic(&self, solution: &NetSolution) -> Vec<LogicLevel> {
        solution
            .status
            .iter()
            .zip(&solution.pressures)
            .enumerate()
            .map(|(i, (status, &p))| match status {
                NetStatus::Conflict => LogicLevel::Undefined,
                NetStatus::Trapped if !self.ever_driven[i] => LogicLevel::Undefined,
                _ => kpa_to_logic(
                    PressureSignal::new(p).unwrap_or(PressureSignal::ATMOSPHERE),
                    self.graph.rails(),
                ),
            })
            .collect()
    }

    /// Resolves nets, then updates all membranes simultaneously from
    /// `delta_p = P(ctrl_top) - P(ctrl_bottom)`. Returns the pre-update
    /// solution. Errors if a declared input is unassigned.
    pub fn tick(
        &mut self,
        inputs: &BTreeMap<NetId, PressureSignal>,
    ) -> Result<NetSolution, SimError> {
        for input in self.graph.inputs() {
            if !inputs.contains_key(&input) {
                return Err(SimError::MissingInput(self.graph.net_name(input).to_string()));
            }
        }
        let solution = self.resolve(inputs);
        for (i, driven) in self.ever_driven.iter_mut().enumerate() {
            *driven |= solution.status[i] == NetStatus::Driven;
        }
        for (valve, state) in self.graph.valves().iter().zip(self.states.iter_mut()) {
            let dp = solution.pressure(valve.ports.ctrl_top)
                - solution.pressure(valve.ports.ctrl_bottom);
            *state = membrane_update(&valve.spec, *state, dp);
        }
        self.previous = solution.pressures.clone();
        for (i, status) in solution.status.iter().enumerate() {
            self.trapped_streak[i] = match status {
                NetStatus::Trapped => self.trapped_streak[i] + 1,
                _ => 0,
            };
            if let Some(limit) = self.options.leak_after_ticks {
                if self.trapped_streak[i] >= limit {
                    self.previous[i] = 0.0;
                }
            }
        }
        Ok(solution)
    }

    /// Snapshot of the global state after the most recent tick, used for
    /// settling and cycle detection.
    fn snapshot(&self) -> Snapshot {
        Snapshot {
            states: self.states.clone(),
            pressures: self.previous.iter().map(|p| p.to_bits()).collect(),
        }
    }
}

fn dsu_find(dsu: &mut Dsu, id: NetId) -> usize {
    dsu.find(id.index())
}

#[derive(Clone, PartialEq, Eq)]
struct Snapshot {
    states: Vec<MembraneState>,
    pressures: Vec<u64>,
}

/// Runs a stimulus to completion: iterates [`Simulator::tick`], detecting
/// settling or oscillation in the stretch after the last stimulus change,
/// and stopping at `max_ticks` otherwise. Tick 0 reflects the declared
/// initial membrane states before any update.
pub fn run(
    graph: &CircuitGraph,
    stimulus: &Stimulus,
    max_ticks: u64,
) -> Result<Waveform, SimError> {
    stimulus.validate(graph)?;
    let max_ticks = max_ticks.max(1);
    let mut sim = Simulator::new(graph)?;
    let last_change = stimulus.last_change();

    let mut current: BTreeMap<NetId, PressureSignal> = BTreeMap::new();
    let mut next_step = 0usize;

    let mut records = Vec::new();
    let mut first_conflict: Option<u64> = None;
    let mut history: VecDeque<Snapshot> = VecDeque::new();
    let mut status = RunStatus::Truncated { max_ticks };

    for tick in 0..max_ticks {
        while next_step < stimulus.steps.len() && stimulus.steps[next_step].tick == tick {
            for (net, value) in &stimulus.steps[next_step].values {
                current.insert(*net, *value);
            }
            next_step += 1;
        }
        let membranes = sim.states.clone();
        let solution = sim.tick(&current)?;
        let logic = sim.logic(&solution);
        if first_conflict.is_none() && solution.has_conflict() {
            first_conflict = Some(tick);
        }
        records.push(TickRecord {
            tick,
            solution,
            logic,
            membranes,
        });

        if tick >= last_change {
            let snap = sim.snapshot();
            if let Some(back) = history.iter().rev().position(|s| *s == snap) {
                let period = (back + 1) as u64;
                status = if period == 1 {
                    RunStatus::Settled { tick }
                } else {
                    RunStatus::Oscillating { period }
                };
                break;
            }
            history.push_back(snap);
            if history.len() > CYCLE_WINDOW {
                history.pop_front();
            }
        }
    }

    if let Some(tick) = first_conflict {
        status = RunStatus::Conflict { tick };
    }
    Ok(Waveform { records, status })
}

/// Outcome of driving constant inputs until the state stops changing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettleOutcome {
    /// Fixed point reached after this many ticks.
    Settled { ticks: u64 },
    Oscillating { period: u64 },
    Conflict,
    BudgetExceeded,
}

/// Holds `inputs` constant and ticks until the global state repeats.
/// Returns the final net solution alongside the outcome.
pub fn settle(
    sim: &mut Simulator<'_>,
    inputs: &BTreeMap<NetId, PressureSignal>,
    budget: u64,
) -> Result<(SettleOutcome, NetSolution), SimError> {
    let mut history: VecDeque<Snapshot> = VecDeque::new();
    history.push_back(sim.snapshot());
    let mut last = None;
    for t in 0..budget {
        let solution = sim.tick(inputs)?;
        if solution.has_conflict() {
            return Ok((SettleOutcome::Conflict, solution));
        }
        let snap = sim.snapshot();
        if let Some(back) = history.iter().rev().position(|s| *s == snap) {
            let outcome = if back == 0 {
                SettleOutcome::Settled { ticks: t + 1 }
            } else {
                SettleOutcome::Oscillating {
                    period: (back + 1) as u64,
                }
            };
            return Ok((outcome, solution));
        }
        history.push_back(snap);
        if history.len() > CYCLE_WINDOW {
            history.pop_front();
        }
        last = Some(solution);
    }
    let solution = last.unwrap_or_else(|| sim.resolve(inputs));
    Ok((SettleOutcome::BudgetExceeded, solution))
}
