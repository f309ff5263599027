//! Circuit representation at two levels: gate-level (NOT/AND/OR/INHIBIT/
//! BUFFER/SR-latch plus macro gates) and valve-level (valve instances,
//! nets, sources), with the elaboration from gates to single-valve
//! configurations.
//!
//! Nets are interned by name. A net can carry a fixed source (supply or
//! atmosphere), be an external input, or be internal. At gate level each
//! net is driven by at most one gate; at valve level tubes may join nets
//! freely, wired junctions are physical.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::pressure::{PressureSignal, RailConfig};
use crate::valve::{MembraneState, Stability, ValveSpec, NOMINAL_SNAP_BACK_KPA, NOMINAL_SNAP_THROUGH_KPA};

/// Index of an interned net within one [`CircuitGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NetId(pub(crate) usize);

impl NetId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// What drives a net from outside the valve array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// Rail at a fixed pressure (supply or atmosphere).
    Fixed(PressureSignal),
    /// External input, assigned per tick by the stimulus.
    Input,
}

/// Which of the two views a graph holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Gate,
    Valve,
}

/// Gate library. The `Xor*`/`DLatch*` entries are macros that expand into
/// primitives (see [`crate::optimize::expand_macros`]); the rest map onto
/// one valve each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateKind {
    Not,
    Buffer,
    And,
    Or,
    /// Two-input gate computing `Q = !A && B`.
    Inhibit,
    /// Bistable set-reset element.
    SrLatch,
    /// Macro: XOR as two NOT, two AND, one OR.
    Xor5,
    /// Macro: XOR as two INHIBIT and one OR.
    Xor3,
    /// Macro: conventional D-latch, two NOT, three AND, one OR.
    DLatch6,
    /// Macro: D-latch as AND, INHIBIT and one set-reset element.
    DLatch3,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Not | GateKind::Buffer => 1,
            _ => 2,
        }
    }

    pub fn is_macro(self) -> bool {
        matches!(
            self,
            GateKind::Xor5 | GateKind::Xor3 | GateKind::DLatch6 | GateKind::DLatch3
        )
    }

    /// Port keywords used by the text format, in `inputs` order.
    pub fn input_port_names(self) -> &'static [&'static str] {
        match self {
            GateKind::Not | GateKind::Buffer => &["in"],
            GateKind::And | GateKind::Or | GateKind::Inhibit | GateKind::Xor5 | GateKind::Xor3 => {
                &["a", "b"]
            }
            GateKind::SrLatch => &["s", "r"],
            GateKind::DLatch6 | GateKind::DLatch3 => &["d", "clk"],
        }
    }

    /// Whether the kind carries a declared initial state (memory elements).
    pub fn has_initial_state(self) -> bool {
        matches!(self, GateKind::SrLatch | GateKind::DLatch3)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            GateKind::Not => "NOT",
            GateKind::Buffer => "BUFFER",
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Inhibit => "INHIBIT",
            GateKind::SrLatch => "SRLATCH",
            GateKind::Xor5 => "XOR5",
            GateKind::Xor3 => "XOR3",
            GateKind::DLatch6 => "DLATCH6",
            GateKind::DLatch3 => "DLATCH3",
        }
    }

    pub fn from_keyword(kw: &str) -> Option<GateKind> {
        Some(match kw {
            "NOT" => GateKind::Not,
            "BUFFER" => GateKind::Buffer,
            "AND" => GateKind::And,
            "OR" => GateKind::Or,
            "INHIBIT" => GateKind::Inhibit,
            "SRLATCH" => GateKind::SrLatch,
            "XOR5" => GateKind::Xor5,
            "XOR3" => GateKind::Xor3,
            "DLATCH6" => GateKind::DLatch6,
            "DLATCH3" => GateKind::DLatch3,
            _ => return None,
        })
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.keyword())
    }
}

/// One gate instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    /// Declared initial state for memory-bearing kinds; `None` elsewhere.
    pub init: Option<MembraneState>,
}

/// Net bindings of one valve. Control chambers sense pressure only; the
/// two tubes conduct when open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValvePorts {
    pub ctrl_top: NetId,
    pub ctrl_bottom: NetId,
    pub top_in: NetId,
    pub top_out: NetId,
    pub bot_in: NetId,
    pub bot_out: NetId,
}

impl ValvePorts {
    pub fn all(&self) -> [NetId; 6] {
        [
            self.ctrl_top,
            self.ctrl_bottom,
            self.top_in,
            self.top_out,
            self.bot_in,
            self.bot_out,
        ]
    }
}

/// One physical valve in a valve-level graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ValveInstance {
    pub name: String,
    pub spec: ValveSpec,
    /// Membrane position at tick 0. `Up` for monostable valves.
    pub initial: MembraneState,
    pub ports: ValvePorts,
}

/// Default snap thresholds applied to valves created during elaboration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapDefaults {
    pub snap_through_kpa: f64,
    pub snap_back_kpa: f64,
}

impl Default for SnapDefaults {
    fn default() -> Self {
        SnapDefaults {
            snap_through_kpa: NOMINAL_SNAP_THROUGH_KPA,
            snap_back_kpa: NOMINAL_SNAP_BACK_KPA,
        }
    }
}

/// A circuit at either level: interned nets, sources, declared inputs and
/// outputs, and the gate or valve population.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    level: Level,
    net_names: Vec<String>,
    ids: BTreeMap<String, NetId>,
    sources: Vec<(NetId, Source)>,
    outputs: Vec<NetId>,
    gates: Vec<Gate>,
    valves: Vec<ValveInstance>,
    rails: RailConfig,
    snap_defaults: SnapDefaults,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuildError {
    WrongLevel { expected: Level },
    BadNetName(String),
    UnknownNet(NetId),
    ArityMismatch { kind: GateKind, got: usize },
    DuplicateName(String),
    InitNotAllowed(GateKind),
    MonostableInitialDown(String),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::WrongLevel { expected } => {
                write!(f, "operation requires a {expected:?}-level graph")
            }
            BuildError::BadNetName(n) => write!(f, "invalid net name {n:?}"),
            BuildError::UnknownNet(id) => write!(f, "net id {} out of range", id.0),
            BuildError::ArityMismatch { kind, got } => {
                write!(f, "{kind} takes {} inputs, got {got}", kind.arity())
            }
            BuildError::DuplicateName(n) => write!(f, "duplicate element name {n:?}"),
            BuildError::InitNotAllowed(k) => {
                write!(f, "{k} does not carry an initial state")
            }
            BuildError::MonostableInitialDown(n) => {
                write!(f, "monostable valve {n:?} must start Up")
            }
        }
    }
}

impl core::error::Error for BuildError {}

/// One broken invariant found by [`CircuitGraph::validate`]. Violations
/// are data, not errors: validation always completes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Net, gate or valve name the rule applies to.
    pub subject: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

impl CircuitGraph {
    pub fn new(level: Level) -> Self {
        CircuitGraph {
            level,
            net_names: Vec::new(),
            ids: BTreeMap::new(),
            sources: Vec::new(),
            outputs: Vec::new(),
            gates: Vec::new(),
            valves: Vec::new(),
            rails: RailConfig::default(),
            snap_defaults: SnapDefaults::default(),
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn rails(&self) -> &RailConfig {
        &self.rails
    }

    pub fn set_rails(&mut self, rails: RailConfig) {
        self.rails = rails;
    }

    pub fn snap_defaults(&self) -> SnapDefaults {
        self.snap_defaults
    }

    pub fn set_snap_defaults(&mut self, d: SnapDefaults) {
        self.snap_defaults = d;
    }

    /// Interns a net name, returning the existing id if already present.
    /// Names must be non-empty and free of whitespace, `,`, `=` and `#`.
    pub fn intern_net(&mut self, name: &str) -> Result<NetId, BuildError> {
        if name.is_empty()
            || name
                .chars()
                .any(|c| c.is_whitespace() || c == ',' || c == '=' || c == '#')
        {
            return Err(BuildError::BadNetName(name.to_string()));
        }
        if let Some(&id) = self.ids.get(name) {
            return Ok(id);
        }
        let id = NetId(self.net_names.len());
        self.net_names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn net_id(&self, name: &str) -> Option<NetId> {
        self.ids.get(name).copied()
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.net_names[id.0]
    }

    pub fn net_count(&self) -> usize {
        self.net_names.len()
    }

    pub fn net_names(&self) -> impl Iterator<Item = (NetId, &str)> {
        self.net_names
            .iter()
            .enumerate()
            .map(|(i, n)| (NetId(i), n.as_str()))
    }

    /// Declares a fixed-pressure source on a net. Conflicting declarations
    /// are kept and surface as validation violations.
    pub fn add_fixed_source(&mut self, net: NetId, pressure: PressureSignal) {
        self.sources.push((net, Source::Fixed(pressure)));
    }

    /// Declares an externally driven input net.
    pub fn add_input(&mut self, net: NetId) {
        self.sources.push((net, Source::Input));
    }

    /// Declares an observed output net.
    pub fn add_output(&mut self, net: NetId) {
        if !self.outputs.contains(&net) {
            self.outputs.push(net);
        }
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    /// Declared input nets, in declaration order.
    pub fn inputs(&self) -> Vec<NetId> {
        self.sources
            .iter()
            .filter_map(|(n, s)| matches!(s, Source::Input).then_some(*n))
            .collect()
    }

    /// Fixed sources, in declaration order.
    pub fn fixed_sources(&self) -> Vec<(NetId, PressureSignal)> {
        self.sources
            .iter()
            .filter_map(|(n, s)| match s {
                Source::Fixed(p) => Some((*n, *p)),
                Source::Input => None,
            })
            .collect()
    }

    pub fn source_of(&self, net: NetId) -> Option<Source> {
        self.sources.iter().find(|(n, _)| *n == net).map(|(_, s)| *s)
    }

    pub fn is_input(&self, net: NetId) -> bool {
        matches!(self.source_of(net), Some(Source::Input))
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn valves(&self) -> &[ValveInstance] {
        &self.valves
    }

    /// Mutable access for spec substitution (tolerance trials, what-if
    /// stability swaps). Simulation re-validates the graph afterwards.
    pub fn valves_mut(&mut self) -> &mut [ValveInstance] {
        &mut self.valves
    }

    pub fn add_gate(
        &mut self,
        name: impl Into<String>,
        kind: GateKind,
        inputs: Vec<NetId>,
        output: NetId,
        init: Option<MembraneState>,
    ) -> Result<(), BuildError> {
        if self.level != Level::Gate {
            return Err(BuildError::WrongLevel {
                expected: Level::Gate,
            });
        }
        let name = name.into();
        if inputs.len() != kind.arity() {
            return Err(BuildError::ArityMismatch {
                kind,
                got: inputs.len(),
            });
        }
        if init.is_some() && !kind.has_initial_state() {
            return Err(BuildError::InitNotAllowed(kind));
        }
        if self.gates.iter().any(|g| g.name == name) {
            return Err(BuildError::DuplicateName(name));
        }
        self.gates.push(Gate {
            name,
            kind,
            inputs,
            output,
            init,
        });
        Ok(())
    }

    pub fn add_valve(
        &mut self,
        name: impl Into<String>,
        spec: ValveSpec,
        initial: MembraneState,
        ports: ValvePorts,
    ) -> Result<(), BuildError> {
        if self.level != Level::Valve {
            return Err(BuildError::WrongLevel {
                expected: Level::Valve,
            });
        }
        let name = name.into();
        if self.valves.iter().any(|v| v.name == name) {
            return Err(BuildError::DuplicateName(name));
        }
        if spec.stability == Stability::Monostable && initial == MembraneState::Down {
            return Err(BuildError::MonostableInitialDown(name));
        }
        self.valves.push(ValveInstance {
            name,
            spec,
            initial,
            ports,
        });
        Ok(())
    }

    fn net_in_range(&self, id: NetId) -> bool {
        id.0 < self.net_names.len()
    }

    /// Checks every structural invariant and returns the list of
    /// violations; an empty list means the graph is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |subject: &str, rule: String| {
            out.push(Violation {
                subject: subject.to_string(),
                rule,
            })
        };

        // Source conflicts: one net, two different bindings.
        for (i, (net_a, src_a)) in self.sources.iter().enumerate() {
            for (net_b, src_b) in &self.sources[i + 1..] {
                if net_a == net_b && !self.net_in_range(*net_a) {
                    continue;
                }
                if net_a == net_b && src_a != src_b {
                    push(
                        self.net_name(*net_a),
                        "conflicting fixed sources".to_string(),
                    );
                }
            }
        }

        // Dangling ids anywhere.
        let check_net = |id: NetId, subject: &str, out: &mut Vec<Violation>| {
            if !self.net_in_range(id) {
                out.push(Violation {
                    subject: subject.to_string(),
                    rule: format!("dangling port (unknown net id {})", id.0),
                });
            }
        };
        for (net, _) in &self.sources {
            check_net(*net, "source", &mut out);
        }
        for net in &self.outputs {
            check_net(*net, "output", &mut out);
        }
        for g in &self.gates {
            for id in g.inputs.iter().chain(core::iter::once(&g.output)) {
                check_net(*id, &g.name, &mut out);
            }
        }
        for v in &self.valves {
            for id in v.ports.all() {
                check_net(id, &v.name, &mut out);
            }
        }
        if out.iter().any(|v| v.rule.starts_with("dangling")) {
            // Everything below indexes nets; stop at dangling ids.
            return out;
        }

        match self.level {
            Level::Gate => {
                if !self.valves.is_empty() {
                    out.push(Violation {
                        subject: "graph".to_string(),
                        rule: "gate-level graph contains valves".to_string(),
                    });
                }
                self.validate_gate_level(&mut out);
            }
            Level::Valve => {
                if !self.gates.is_empty() {
                    out.push(Violation {
                        subject: "graph".to_string(),
                        rule: "valve-level graph contains gates".to_string(),
                    });
                }
                self.validate_valve_level(&mut out);
            }
        }

        // Every net must be referenced by something.
        let mut referenced = vec![false; self.net_names.len()];
        for (net, _) in &self.sources {
            referenced[net.0] = true;
        }
        for net in &self.outputs {
            referenced[net.0] = true;
        }
        for g in &self.gates {
            for id in g.inputs.iter().chain(core::iter::once(&g.output)) {
                referenced[id.0] = true;
            }
        }
        for v in &self.valves {
            for id in v.ports.all() {
                referenced[id.0] = true;
            }
        }
        for (i, r) in referenced.iter().enumerate() {
            if !r {
                out.push(Violation {
                    subject: self.net_names[i].clone(),
                    rule: "net has no connection".to_string(),
                });
            }
        }

        out
    }

    fn validate_gate_level(&self, out: &mut Vec<Violation>) {
        // Single driver per net.
        let mut drivers: BTreeMap<NetId, &str> = BTreeMap::new();
        for g in &self.gates {
            if let Some(prev) = drivers.insert(g.output, &g.name) {
                out.push(Violation {
                    subject: self.net_name(g.output).to_string(),
                    rule: format!("net driven by two gates ({prev} and {})", g.name),
                });
            }
            if self.source_of(g.output).is_some() {
                out.push(Violation {
                    subject: self.net_name(g.output).to_string(),
                    rule: format!("gate {} drives a source net", g.name),
                });
            }
        }
        // Gate inputs and declared outputs must be driven by something.
        let driven = |net: NetId| drivers.contains_key(&net) || self.source_of(net).is_some();
        for g in &self.gates {
            for &i in &g.inputs {
                if !driven(i) {
                    out.push(Violation {
                        subject: g.name.clone(),
                        rule: format!("dangling net {} on input", self.net_name(i)),
                    });
                }
            }
        }
        for &o in &self.outputs {
            if !driven(o) {
                out.push(Violation {
                    subject: self.net_name(o).to_string(),
                    rule: "output net is not driven".to_string(),
                });
            }
        }
    }

    fn validate_valve_level(&self, out: &mut Vec<Violation>) {
        for v in &self.valves {
            if v.ports.ctrl_top == v.ports.ctrl_bottom {
                out.push(Violation {
                    subject: v.name.clone(),
                    rule: "ctrl_top and ctrl_bottom bind the same net".to_string(),
                });
            }
            if v.spec.stability == Stability::Monostable && v.initial == MembraneState::Down {
                out.push(Violation {
                    subject: v.name.clone(),
                    rule: "monostable valve declared with Down initial state".to_string(),
                });
            }
        }
        // Static reachability: outputs must connect to some source or input
        // through tubes, ignoring kink state (over-approximation).
        let mut dsu = Dsu::new(self.net_names.len());
        for v in &self.valves {
            dsu.union(v.ports.top_in.0, v.ports.top_out.0);
            dsu.union(v.ports.bot_in.0, v.ports.bot_out.0);
        }
        let mut sourced = vec![false; self.net_names.len()];
        for (net, _) in &self.sources {
            sourced[dsu.find(net.0)] = true;
        }
        for &o in &self.outputs {
            if !sourced[dsu.find(o.0)] {
                out.push(Violation {
                    subject: self.net_name(o).to_string(),
                    rule: "output net unreachable from any source".to_string(),
                });
            }
        }
    }

    /// Name-preserving structural equality, insensitive to declaration
    /// order: same level, rails, nets, sources, inputs, outputs, and the
    /// same gate/valve population keyed by element name.
    pub fn isomorphic(&self, other: &CircuitGraph) -> bool {
        if self.level != other.level
            || self.rails != other.rails
            || self.snap_defaults != other.snap_defaults
        {
            return false;
        }
        let names = |g: &CircuitGraph| {
            let mut v: Vec<String> = g.net_names.clone();
            v.sort_unstable();
            v
        };
        if names(self) != names(other) {
            return false;
        }
        let sources = |g: &CircuitGraph| {
            let mut v: Vec<(String, SourceKey)> = g
                .sources
                .iter()
                .map(|(n, s)| {
                    (
                        g.net_name(*n).to_string(),
                        match s {
                            Source::Fixed(p) => SourceKey::Fixed(p.kpa().to_bits()),
                            Source::Input => SourceKey::Input,
                        },
                    )
                })
                .collect();
            v.sort_unstable();
            v
        };
        if sources(self) != sources(other) {
            return false;
        }
        let outs = |g: &CircuitGraph| {
            let mut v: Vec<String> = g.outputs.iter().map(|n| g.net_name(*n).to_string()).collect();
            v.sort_unstable();
            v
        };
        if outs(self) != outs(other) {
            return false;
        }
        let gates = |g: &CircuitGraph| {
            let mut v: Vec<GateKey> = g
                .gates
                .iter()
                .map(|gate| GateKey {
                    name: gate.name.clone(),
                    kind: gate.kind,
                    inputs: gate.inputs.iter().map(|n| g.net_name(*n).to_string()).collect(),
                    output: g.net_name(gate.output).to_string(),
                    init: gate.init,
                })
                .collect();
            v.sort_by(|a, b| a.name.cmp(&b.name));
            v
        };
        if gates(self) != gates(other) {
            return false;
        }
        let valves = |g: &CircuitGraph| {
            let mut v: Vec<(String, ValveKey)> = g
                .valves
                .iter()
                .map(|valve| {
                    (
                        valve.name.clone(),
                        ValveKey {
                            snap_through: valve.spec.snap_through_kpa.to_bits(),
                            snap_back: valve.spec.snap_back_kpa.to_bits(),
                            stability: valve.spec.stability,
                            initial: valve.initial,
                            ports: valve
                                .ports
                                .all()
                                .iter()
                                .map(|n| g.net_name(*n).to_string())
                                .collect(),
                        },
                    )
                })
                .collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        };
        valves(self) == valves(other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SourceKey {
    Fixed(u64),
    Input,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct GateKey {
    name: String,
    kind: GateKind,
    inputs: Vec<String>,
    output: String,
    init: Option<MembraneState>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ValveKey {
    snap_through: u64,
    snap_back: u64,
    stability: Stability,
    initial: MembraneState,
    ports: Vec<String>,
}

/// Disjoint-set union used for tube connectivity.
pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb] = ra;
        }
    }
}

/// Per-kind and total gate counts, macros expanded first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GateCounts {
    pub counts: BTreeMap<GateKind, usize>,
    pub total: usize,
}

impl GateCounts {
    pub fn count(&self, kind: GateKind) -> usize {
        self.counts.get(&kind).copied().unwrap_or(0)
    }
}

impl fmt::Display for GateCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (kind, n) in &self.counts {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{kind}={n}")?;
            first = false;
        }
        if !first {
            write!(f, " ")?;
        }
        write!(f, "total={}", self.total)
    }
}

/// Counts gates per kind, expanding macros into their constituents first.
pub fn gate_count(graph: &CircuitGraph) -> Result<GateCounts, ElaborateError> {
    if graph.level() != Level::Gate {
        return Err(ElaborateError::WrongLevel);
    }
    let expanded = crate::optimize::expand_macros(graph)?;
    let mut counts = BTreeMap::new();
    for g in expanded.gates() {
        *counts.entry(g.kind).or_insert(0) += 1;
    }
    Ok(GateCounts {
        total: expanded.gates().len(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElaborateError {
    WrongLevel,
    /// The input graph fails validation; elaboration refuses to guess.
    Invalid(Vec<Violation>),
    Build(BuildError),
}

impl fmt::Display for ElaborateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElaborateError::WrongLevel => write!(f, "expected a gate-level graph"),
            ElaborateError::Invalid(vs) => {
                write!(f, "graph fails validation ({} violations", vs.len())?;
                if let Some(v) = vs.first() {
                    write!(f, ", first: {v}")?;
                }
                write!(f, ")")
            }
            ElaborateError::Build(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ElaborateError {}

impl From<BuildError> for ElaborateError {
    fn from(e: BuildError) -> Self {
        ElaborateError::Build(e)
    }
}

/// Finds or creates the canonical supply/atmosphere rail net.
fn ensure_rail(
    graph: &mut CircuitGraph,
    preferred: &str,
    pressure: PressureSignal,
) -> Result<NetId, BuildError> {
    if let Some(id) = graph.net_id(preferred) {
        if matches!(graph.source_of(id), Some(Source::Fixed(_))) {
            return Ok(id);
        }
        // Name taken by a non-rail net; pick a fresh one.
        for i in 0.. {
            let candidate = format!("{preferred}_{i}");
            if graph.net_id(&candidate).is_none() {
                let id = graph.intern_net(&candidate)?;
                graph.add_fixed_source(id, pressure);
                return Ok(id);
            }
        }
        unreachable!()
    }
    let id = graph.intern_net(preferred)?;
    graph.add_fixed_source(id, pressure);
    Ok(id)
}

/// Compiles a gate-level graph down to one valve per gate.
///
/// Macros expand first. Wirings follow the complementary-switching rule:
/// the control signal on the top chamber, atmosphere on the bottom chamber,
/// and the two tubes routed so that each membrane position produces the
/// intended output. Supply and atmosphere rails are taken from nets named
/// `SUPPLY`/`ATM` carrying fixed sources, or created from the graph's rail
/// configuration when absent. Input and output net names are preserved.
///
/// | gate           | ctrl_top | ctrl_bottom | top tube      | bottom tube   |
/// |----------------|----------|-------------|---------------|---------------|
/// | NOT(a)         | a        | ATM         | ATM -> q      | SUPPLY -> q   |
/// | BUFFER(a)      | a        | ATM         | SUPPLY -> q   | ATM -> q      |
/// | INHIBIT(a, b)  | a        | ATM         | ATM -> q      | b -> q        |
/// | AND(a, b)      | a        | ATM         | b -> q        | ATM -> q      |
/// | OR(a, b)       | a        | ATM         | SUPPLY -> q   | b -> q        |
/// | SRLATCH(s, r)  | s        | r           | SUPPLY -> q   | ATM -> q      |
///
/// SRLATCH elaborates to a bistable valve; everything else is monostable.
pub fn elaborate(graph: &CircuitGraph) -> Result<CircuitGraph, ElaborateError> {
    if graph.level() != Level::Gate {
        return Err(ElaborateError::WrongLevel);
    }
    let violations = graph.validate();
    if !violations.is_empty() {
        return Err(ElaborateError::Invalid(violations));
    }
    let expanded = crate::optimize::expand_macros(graph)?;

    let mut out = CircuitGraph::new(Level::Valve);
    out.set_rails(*expanded.rails());
    out.set_snap_defaults(expanded.snap_defaults());

    // Copy nets and declarations in order, preserving names.
    for (_, name) in expanded.net_names() {
        out.intern_net(name)?;
    }
    for (net, source) in &expanded.sources {
        let id = out.net_id(expanded.net_name(*net)).expect("net copied");
        match source {
            Source::Fixed(p) => out.add_fixed_source(id, *p),
            Source::Input => out.add_input(id),
        }
    }
    for net in expanded.outputs() {
        let id = out.net_id(expanded.net_name(*net)).expect("net copied");
        out.add_output(id);
    }

    let supply = ensure_rail(&mut out, "SUPPLY", expanded.rails().p_supply)?;
    let atm = ensure_rail(&mut out, "ATM", PressureSignal::ATMOSPHERE)?;
    let d = expanded.snap_defaults();

    for gate in expanded.gates() {
        let name = gate.name.clone();
        let net = |g: &CircuitGraph, id: NetId, out: &CircuitGraph| -> NetId {
            out.net_id(g.net_name(id)).expect("net copied")
        };
        let q = net(&expanded, gate.output, &out);
        let ins: Vec<NetId> = gate.inputs.iter().map(|&i| net(&expanded, i, &out)).collect();
        let (stability, initial) = match gate.kind {
            GateKind::SrLatch => (
                Stability::Bistable,
                gate.init.unwrap_or(MembraneState::Up),
            ),
            _ => (Stability::Monostable, MembraneState::Up),
        };
        let spec = ValveSpec::new(name.clone(), stability, d.snap_through_kpa, d.snap_back_kpa)
            .map_err(|_| {
                ElaborateError::Build(BuildError::BadNetName("invalid snap defaults".into()))
            })?;
        let ports = match gate.kind {
            GateKind::Not => ValvePorts {
                ctrl_top: ins[0],
                ctrl_bottom: atm,
                top_in: atm,
                top_out: q,
                bot_in: supply,
                bot_out: q,
            },
            GateKind::Buffer => ValvePorts {
                ctrl_top: ins[0],
                ctrl_bottom: atm,
                top_in: supply,
                top_out: q,
                bot_in: atm,
                bot_out: q,
            },
            GateKind::Inhibit => ValvePorts {
                ctrl_top: ins[0],
                ctrl_bottom: atm,
                top_in: atm,
                top_out: q,
                bot_in: ins[1],
                bot_out: q,
            },
            GateKind::And => ValvePorts {
                ctrl_top: ins[0],
                ctrl_bottom: atm,
                top_in: ins[1],
                top_out: q,
                bot_in: atm,
                bot_out: q,
            },
            GateKind::Or => ValvePorts {
                ctrl_top: ins[0],
                ctrl_bottom: atm,
                top_in: supply,
                top_out: q,
                bot_in: ins[1],
                bot_out: q,
            },
            GateKind::SrLatch => ValvePorts {
                ctrl_top: ins[0],
                ctrl_bottom: ins[1],
                top_in: supply,
                top_out: q,
                bot_in: atm,
                bot_out: q,
            },
            macro_kind => {
                debug_assert!(false, "macro {macro_kind} should be expanded");
                return Err(ElaborateError::Build(BuildError::ArityMismatch {
                    kind: macro_kind,
                    got: gate.inputs.len(),
                }));
            }
        };
        out.add_valve(name, spec, initial, ports)?;
    }

    let violations = out.validate();
    if !violations.is_empty() {
        return Err(ElaborateError::Invalid(violations));
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::pressure::PressureSignal;

    fn p(kpa: f64) -> PressureSignal {
        PressureSignal::new(kpa).unwrap()
    }

    /// Gate-level XOR3 as drawn with two INHIBIT gates and an OR.
    pub(crate) fn xor3_graph() -> CircuitGraph {
        let mut g = CircuitGraph::new(Level::Gate);
        let a = g.intern_net("A").unwrap();
        let b = g.intern_net("B").unwrap();
        let x1 = g.intern_net("x1").unwrap();
        let x2 = g.intern_net("x2").unwrap();
        let q = g.intern_net("Q").unwrap();
        g.add_input(a);
        g.add_input(b);
        g.add_output(q);
        g.add_gate("g1", GateKind::Inhibit, vec![b, a], x1, None).unwrap();
        g.add_gate("g2", GateKind::Inhibit, vec![a, b], x2, None).unwrap();
        g.add_gate("g3", GateKind::Or, vec![x1, x2], q, None).unwrap();
        g
    }

    #[test]
    fn well_formed_xor3_validates_clean() {
        assert!(xor3_graph().validate().is_empty());
    }

    #[test]
    fn conflicting_sources_flagged() {
        let mut g = CircuitGraph::new(Level::Valve);
        let n = g.intern_net("N").unwrap();
        g.add_fixed_source(n, p(160.0));
        g.add_fixed_source(n, p(0.0));
        let v = g.validate();
        assert!(v.iter().any(|v| v.rule.contains("conflicting fixed sources")), "{v:?}");
    }

    #[test]
    fn dangling_port_flagged() {
        let mut g = CircuitGraph::new(Level::Valve);
        let n = g.intern_net("N").unwrap();
        g.add_fixed_source(n, p(160.0));
        let bogus = NetId(17);
        g.add_valve(
            "v1",
            ValveSpec::monostable("v1"),
            MembraneState::Up,
            ValvePorts {
                ctrl_top: n,
                ctrl_bottom: bogus,
                top_in: n,
                top_out: n,
                bot_in: n,
                bot_out: bogus,
            },
        )
        .unwrap();
        let v = g.validate();
        assert!(v.iter().any(|v| v.rule.contains("dangling port")), "{v:?}");
    }

    #[test]
    fn self_control_flagged() {
        let mut g = CircuitGraph::new(Level::Valve);
        let a = g.intern_net("A").unwrap();
        let q = g.intern_net("Q").unwrap();
        g.add_input(a);
        g.add_valve(
            "v1",
            ValveSpec::monostable("v1"),
            MembraneState::Up,
            ValvePorts {
                ctrl_top: a,
                ctrl_bottom: a,
                top_in: q,
                top_out: q,
                bot_in: q,
                bot_out: q,
            },
        )
        .unwrap();
        let v = g.validate();
        assert!(v.iter().any(|v| v.rule.contains("ctrl_top and ctrl_bottom")), "{v:?}");
    }

    #[test]
    fn gate_arity_checked_at_build() {
        let mut g = CircuitGraph::new(Level::Gate);
        let a = g.intern_net("A").unwrap();
        let q = g.intern_net("Q").unwrap();
        let err = g.add_gate("n1", GateKind::Not, vec![a, a], q, None).unwrap_err();
        assert!(matches!(err, BuildError::ArityMismatch { .. }));
    }

    #[test]
    fn elaboration_preserves_io_names_one_valve_per_gate() {
        let g = xor3_graph();
        let v = elaborate(&g).unwrap();
        assert_eq!(v.level(), Level::Valve);
        assert_eq!(v.valves().len(), 3);
        for name in ["A", "B", "Q"] {
            assert!(v.net_id(name).is_some(), "net {name} lost in elaboration");
        }
        assert!(v.net_id("SUPPLY").is_some());
        assert!(v.net_id("ATM").is_some());
        assert!(v.validate().is_empty());
    }

    #[test]
    fn gate_count_totals() {
        let g = xor3_graph();
        let c = gate_count(&g).unwrap();
        assert_eq!(c.count(GateKind::Inhibit), 2);
        assert_eq!(c.count(GateKind::Or), 1);
        assert_eq!(c.total, 3);

        let empty = CircuitGraph::new(Level::Gate);
        assert_eq!(gate_count(&empty).unwrap().total, 0);
    }

    #[test]
    fn isomorphism_ignores_declaration_order() {
        let g1 = xor3_graph();
        let mut g2 = CircuitGraph::new(Level::Gate);
        // Same circuit, different statement order.
        let q = g2.intern_net("Q").unwrap();
        let b = g2.intern_net("B").unwrap();
        let a = g2.intern_net("A").unwrap();
        let x2 = g2.intern_net("x2").unwrap();
        let x1 = g2.intern_net("x1").unwrap();
        g2.add_output(q);
        g2.add_input(a);
        g2.add_input(b);
        g2.add_gate("g3", GateKind::Or, vec![x1, x2], q, None).unwrap();
        g2.add_gate("g2", GateKind::Inhibit, vec![a, b], x2, None).unwrap();
        g2.add_gate("g1", GateKind::Inhibit, vec![b, a], x1, None).unwrap();
        assert!(g1.isomorphic(&g2));
        assert!(g2.isomorphic(&g1));

        let mut g3 = xor3_graph();
        let extra = g3.intern_net("extra").unwrap();
        g3.add_output(extra);
        assert!(!g1.isomorphic(&g3));
    }
}
