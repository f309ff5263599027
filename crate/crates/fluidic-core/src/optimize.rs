//! Gate-level rewriting: macro expansion plus INHIBIT-based reductions,
//! with mandatory post-rewrite equivalence verification.
//!
//! Two rewrite families reproduce the classic reductions:
//!
//! - `inhibit-fuse`: a NOT feeding a fan-out-1 AND collapses into a single
//!   INHIBIT gate, taking an XOR from five gates to three.
//! - `sr-fuse`: the gate-built set-reset feedback loop (in either its
//!   NOT/AND/OR form or the already-fused OR/INHIBIT form) collapses into
//!   one bistable set-reset element, taking a D-latch from six elements to
//!   three.
//!
//! Every optimizer run verifies the rewritten circuit against its input
//! (exhaustively for combinational circuits, by bounded sequences when a
//! latch is involved) and returns the original unchanged if the check
//! fails: the compiler never miscompiles.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::analysis::{
    equiv_comb, equiv_seq, AnalysisError, EquivalenceReport, DEFAULT_SEQUENCE_LENGTH,
};
use crate::netlist::{
    gate_count, BuildError, CircuitGraph, ElaborateError, Gate, GateCounts, GateKind, Level, NetId,
};
use crate::valve::MembraneState;

/// A gate described by net names, independent of any graph's interning.
#[derive(Debug, Clone, PartialEq)]
struct GateByName {
    name: String,
    kind: GateKind,
    inputs: Vec<String>,
    output: String,
    init: Option<MembraneState>,
}

impl GateByName {
    fn of(graph: &CircuitGraph, gate: &Gate) -> Self {
        GateByName {
            name: gate.name.clone(),
            kind: gate.kind,
            inputs: gate
                .inputs
                .iter()
                .map(|n| graph.net_name(*n).to_string())
                .collect(),
            output: graph.net_name(gate.output).to_string(),
            init: gate.init,
        }
    }
}

/// Builds a gate-level graph with `template`'s rails, sources and outputs
/// but a new gate population. Nets referenced by nothing are pruned.
fn rebuild(template: &CircuitGraph, gates: &[GateByName]) -> Result<CircuitGraph, BuildError> {
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for g in gates {
        used.insert(g.output.as_str());
        for i in &g.inputs {
            used.insert(i.as_str());
        }
    }
    let mut out = CircuitGraph::new(Level::Gate);
    out.set_rails(*template.rails());
    out.set_snap_defaults(template.snap_defaults());

    // Template nets first, in original order, then any new internal nets.
    for (id, name) in template.net_names() {
        let keep = template.source_of(id).is_some()
            || template.outputs().contains(&id)
            || used.contains(name);
        if keep {
            out.intern_net(name)?;
        }
    }
    for (net, source) in template.fixed_sources() {
        let id = out.intern_net(template.net_name(net))?;
        out.add_fixed_source(id, source);
    }
    for net in template.inputs() {
        let id = out.intern_net(template.net_name(net))?;
        out.add_input(id);
    }
    for net in template.outputs() {
        let id = out.intern_net(template.net_name(*net))?;
        out.add_output(id);
    }
    for g in gates {
        let inputs: Vec<NetId> = g
            .inputs
            .iter()
            .map(|n| out.intern_net(n))
            .collect::<Result<_, _>>()?;
        let output = out.intern_net(&g.output)?;
        out.add_gate(g.name.clone(), g.kind, inputs, output, g.init)?;
    }
    Ok(out)
}

/// Picks a name not yet present in `taken`, starting from `base`.
fn fresh(base: &str, taken: &mut BTreeSet<String>) -> String {
    if taken.insert(base.to_string()) {
        return base.to_string();
    }
    for i in 2.. {
        let candidate = format!("{base}_{i}");
        if taken.insert(candidate.clone()) {
            return candidate;
        }
    }
    unreachable!()
}

/// Expands every macro gate into its primitive constituents; primitive
/// gates pass through unchanged.
///
/// - `XOR5(a, b)`: `(a AND NOT b) OR (NOT a AND b)`: two NOT, two AND,
///   one OR.
/// - `XOR3(a, b)`: `INHIBIT(b, a) OR INHIBIT(a, b)`: two INHIBIT, one OR.
/// - `DLATCH6(d, clk)`: the conventional form, two NOT, three AND and an
///   OR with the output fed back through the OR.
/// - `DLATCH3(d, clk)`: `AND(d, clk) -> S`, `INHIBIT(d, clk) -> R`,
///   `SRLATCH(S, R) -> q`.
pub fn expand_macros(graph: &CircuitGraph) -> Result<CircuitGraph, ElaborateError> {
    if graph.level() != Level::Gate {
        return Err(ElaborateError::WrongLevel);
    }
    if graph.gates().iter().all(|g| !g.kind.is_macro()) {
        return Ok(graph.clone());
    }

    let mut net_names: BTreeSet<String> = graph.net_names().map(|(_, n)| n.to_string()).collect();
    let mut gate_names: BTreeSet<String> =
        graph.gates().iter().map(|g| g.name.clone()).collect();
    // Macro gates free their own name for reuse by a constituent.
    for g in graph.gates() {
        if g.kind.is_macro() {
            gate_names.remove(&g.name);
        }
    }

    let mut gates: Vec<GateByName> = Vec::new();
    for gate in graph.gates() {
        if !gate.kind.is_macro() {
            gates.push(GateByName::of(graph, gate));
            continue;
        }
        let m = &gate.name;
        let a = graph.net_name(gate.inputs[0]).to_string();
        let b = graph.net_name(gate.inputs[1]).to_string();
        let q = graph.net_name(gate.output).to_string();
        let mut net = |suffix: &str| fresh(&format!("{m}_{suffix}"), &mut net_names);
        let mut gname = |suffix: &str| fresh(&format!("{m}_{suffix}"), &mut gate_names);
        let prim = |name: String, kind: GateKind, inputs: Vec<String>, output: String| GateByName {
            name,
            kind,
            inputs,
            output,
            init: None,
        };
        match gate.kind {
            GateKind::Xor5 => {
                let na = net("na");
                let nb = net("nb");
                let x1 = net("x1");
                let x2 = net("x2");
                gates.push(prim(gname("not1"), GateKind::Not, vec![a.clone()], na.clone()));
                gates.push(prim(gname("not2"), GateKind::Not, vec![b.clone()], nb.clone()));
                gates.push(prim(gname("and1"), GateKind::And, vec![a, nb], x1.clone()));
                gates.push(prim(gname("and2"), GateKind::And, vec![na, b], x2.clone()));
                gates.push(prim(gname("or"), GateKind::Or, vec![x1, x2], q));
            }
            GateKind::Xor3 => {
                let x1 = net("x1");
                let x2 = net("x2");
                gates.push(prim(
                    gname("inh1"),
                    GateKind::Inhibit,
                    vec![b.clone(), a.clone()],
                    x1.clone(),
                ));
                gates.push(prim(gname("inh2"), GateKind::Inhibit, vec![a, b], x2.clone()));
                gates.push(prim(gname("or"), GateKind::Or, vec![x1, x2], q));
            }
            GateKind::DLatch6 => {
                let nd = net("nd");
                let s = net("s");
                let r = net("r");
                let nr = net("nr");
                let o = net("o");
                gates.push(prim(gname("not1"), GateKind::Not, vec![a.clone()], nd.clone()));
                gates.push(prim(
                    gname("and1"),
                    GateKind::And,
                    vec![a, b.clone()],
                    s.clone(),
                ));
                gates.push(prim(gname("and2"), GateKind::And, vec![nd, b], r.clone()));
                gates.push(prim(gname("not2"), GateKind::Not, vec![r], nr.clone()));
                gates.push(prim(gname("or"), GateKind::Or, vec![s, q.clone()], o.clone()));
                gates.push(prim(gname("and3"), GateKind::And, vec![o, nr], q));
            }
            GateKind::DLatch3 => {
                let s = net("s");
                let r = net("r");
                gates.push(prim(
                    gname("and"),
                    GateKind::And,
                    vec![a.clone(), b.clone()],
                    s.clone(),
                ));
                gates.push(prim(gname("inh"), GateKind::Inhibit, vec![a, b], r.clone()));
                gates.push(GateByName {
                    name: gname("sr"),
                    kind: GateKind::SrLatch,
                    inputs: vec![s, r],
                    output: q,
                    init: Some(gate.init.unwrap_or(MembraneState::Up)),
                });
            }
            _ => unreachable!("primitive handled above"),
        }
    }
    rebuild(graph, &gates).map_err(ElaborateError::Build)
}

/// The rewrite families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleKind {
    InhibitFuse,
    SrFuse,
}

/// A rewrite rule: a boundary pattern, its single-gate replacement, and
/// the applicability notes under which the pair is equivalent.
#[derive(Debug, Clone, Copy)]
pub struct RewriteRule {
    pub kind: RuleKind,
    pub name: &'static str,
    /// Constraint the surrounding circuit must guarantee for the pair to
    /// be equivalent; checked by the whole-circuit verification either way.
    pub notes: &'static str,
}

/// The shipped rule set, in priority order.
pub fn rules() -> &'static [RewriteRule] {
    &[
        RewriteRule {
            kind: RuleKind::InhibitFuse,
            name: "inhibit-fuse",
            notes: "applies when the NOT output feeds exactly one AND input \
                    and the AND is not part of a set-reset feedback loop \
                    (that loop belongs to sr-fuse)",
        },
        RewriteRule {
            kind: RuleKind::SrFuse,
            name: "sr-fuse",
            notes: "equivalent while S and R are never driven high together; \
                    the set-reset element holds state on that input where the \
                    gate loop resets",
        },
    ]
}

impl RuleKind {
    fn rule(self) -> &'static RewriteRule {
        &rules()[match self {
            RuleKind::InhibitFuse => 0,
            RuleKind::SrFuse => 1,
        }]
    }

    /// The pattern as a standalone circuit over its boundary nets.
    pub fn pattern(self) -> CircuitGraph {
        let mut gates = Vec::new();
        match self {
            RuleKind::InhibitFuse => {
                gates.push(("n1", GateKind::Not, vec!["x"], "n"));
                gates.push(("a1", GateKind::And, vec!["n", "b"], "q"));
                boundary_circuit(&["x", "b"], "q", &gates)
            }
            RuleKind::SrFuse => {
                gates.push(("n1", GateKind::Not, vec!["r"], "nr"));
                gates.push(("o1", GateKind::Or, vec!["s", "q"], "o"));
                gates.push(("a1", GateKind::And, vec!["o", "nr"], "q"));
                boundary_circuit(&["s", "r"], "q", &gates)
            }
        }
    }

    /// The replacement as a standalone circuit over the same boundary.
    pub fn replacement(self) -> CircuitGraph {
        match self {
            RuleKind::InhibitFuse => boundary_circuit(
                &["x", "b"],
                "q",
                &[("a1", GateKind::Inhibit, vec!["x", "b"], "q")],
            ),
            RuleKind::SrFuse => boundary_circuit(
                &["s", "r"],
                "q",
                &[("a1", GateKind::SrLatch, vec!["s", "r"], "q")],
            ),
        }
    }
}

fn boundary_circuit(
    inputs: &[&str],
    output: &str,
    gates: &[(&str, GateKind, Vec<&str>, &str)],
) -> CircuitGraph {
    let mut g = CircuitGraph::new(Level::Gate);
    for name in inputs {
        let id = g.intern_net(name).unwrap();
        g.add_input(id);
    }
    let out = g.intern_net(output).unwrap();
    g.add_output(out);
    for (name, kind, ins, q) in gates {
        let ins: Vec<NetId> = ins.iter().map(|n| g.intern_net(n).unwrap()).collect();
        let q = g.intern_net(q).unwrap();
        let init = (*kind == GateKind::SrLatch).then_some(MembraneState::Up);
        g.add_gate(*name, *kind, ins, q, init).unwrap();
    }
    g
}

/// Checks every rule's proof obligation: the replacement is equivalent to
/// the pattern on its boundary. The inhibit fuse is checked exhaustively;
/// the set-reset fuses by bounded sequences excluding the forbidden
/// simultaneous set-and-reset input their notes rule out.
pub fn verify_rule_obligations() -> Result<(), (RuleKind, AnalysisError)> {
    for rule in rules() {
        let pattern = rule.kind.pattern();
        let replacement = rule.kind.replacement();
        let report = match rule.kind {
            RuleKind::InhibitFuse => {
                equiv_comb(&pattern, &replacement).map_err(|e| (rule.kind, e))?
            }
            RuleKind::SrFuse => {
                // Inputs sort as [r, s]; forbid r && s high together.
                equiv_seq_filtered(&pattern, &replacement, 4, |bits| !(bits[0] && bits[1]))
                    .map_err(|e| (rule.kind, e))?
            }
        };
        if !report.is_equivalent() {
            return Err((
                rule.kind,
                AnalysisError::NotCombinational(format!(
                    "rule {} obligation failed: {report}",
                    rule.name
                )),
            ));
        }
    }
    Ok(())
}

/// [`equiv_seq`] restricted to sequences whose every step satisfies
/// `allowed` (inputs in sorted-name order). Used for rule obligations
/// whose applicability notes exclude certain inputs.
pub fn equiv_seq_filtered(
    g1: &CircuitGraph,
    g2: &CircuitGraph,
    max_len: usize,
    allowed: impl Fn(&[bool]) -> bool,
) -> Result<EquivalenceReport, AnalysisError> {
    crate::analysis::equiv_seq_with_filter(g1, g2, max_len, &allowed)
}

/// One rewrite site: the rule, the gates it removes, and its replacement.
#[derive(Debug, Clone)]
struct Candidate {
    rule: RuleKind,
    /// Smallest index among the matched gates; orders candidates.
    anchor: usize,
    site: String,
    remove: Vec<String>,
    add: GateByName,
}

/// Human-readable site plus the rule that fired there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedRewrite {
    pub rule: &'static str,
    pub site: String,
    pub total_before: usize,
    pub total_after: usize,
}

fn find_candidates(graph: &CircuitGraph) -> Vec<Candidate> {
    let gates = graph.gates();
    let outputs: BTreeSet<NetId> = graph.outputs().iter().copied().collect();

    let driver = |net: NetId| gates.iter().position(|g| g.output == net);
    let uses = |net: NetId| -> usize {
        gates
            .iter()
            .map(|g| g.inputs.iter().filter(|i| **i == net).count())
            .sum()
    };
    // Internal single-use net: exactly one consumer slot, not observed.
    let fused_ok = |net: NetId| uses(net) == 1 && !outputs.contains(&net);

    // A NOT feeding this AND stays put when the AND closes a set-reset
    // feedback loop (its other input comes from an OR that reads the AND's
    // own output): that loop is sr-fuse territory, and fusing the NOT away
    // first would leave the loop output floating until first set.
    let in_latch_loop = |and: &Gate, other: NetId| -> bool {
        driver(other).is_some_and(|oi| {
            gates[oi].kind == GateKind::Or && gates[oi].inputs.contains(&and.output)
        })
    };

    let mut candidates = Vec::new();

    for (i, gate) in gates.iter().enumerate() {
        // inhibit-fuse: NOT(x) -> n feeding AND(n, b) with fan-out 1.
        if gate.kind == GateKind::Not {
            let n = gate.output;
            if fused_ok(n) {
                if let Some((j, and)) = gates
                    .iter()
                    .enumerate()
                    .find(|(_, g)| g.kind == GateKind::And && g.inputs.contains(&n))
                {
                    let b = if and.inputs[0] == n { and.inputs[1] } else { and.inputs[0] };
                    if b != n && !in_latch_loop(and, b) {
                        candidates.push(Candidate {
                            rule: RuleKind::InhibitFuse,
                            anchor: i.min(j),
                            site: format!("{}+{}", gate.name, and.name),
                            remove: vec![gate.name.clone(), and.name.clone()],
                            add: GateByName {
                                name: and.name.clone(),
                                kind: GateKind::Inhibit,
                                inputs: vec![
                                    graph.net_name(gate.inputs[0]).to_string(),
                                    graph.net_name(b).to_string(),
                                ],
                                output: graph.net_name(and.output).to_string(),
                                init: None,
                            },
                        });
                    }
                }
            }
        }

        // sr-fuse: AND(o, nr) -> q with OR(s, q) -> o and NOT(r) -> nr.
        if gate.kind == GateKind::And {
            let q = gate.output;
            for (o_net, nr_net) in [
                (gate.inputs[0], gate.inputs[1]),
                (gate.inputs[1], gate.inputs[0]),
            ] {
                let Some(oi) = driver(o_net) else { continue };
                let Some(ni) = driver(nr_net) else { continue };
                let (or, not) = (&gates[oi], &gates[ni]);
                if or.kind != GateKind::Or || not.kind != GateKind::Not {
                    continue;
                }
                if !(fused_ok(o_net) && fused_ok(nr_net)) {
                    continue;
                }
                if !or.inputs.contains(&q) {
                    continue;
                }
                let s = if or.inputs[0] == q { or.inputs[1] } else { or.inputs[0] };
                let r = not.inputs[0];
                if s == q || r == q || s == r {
                    continue;
                }
                candidates.push(Candidate {
                    rule: RuleKind::SrFuse,
                    anchor: i.min(oi).min(ni),
                    site: format!("{}+{}+{}", or.name, not.name, gate.name),
                    remove: vec![or.name.clone(), not.name.clone(), gate.name.clone()],
                    add: GateByName {
                        name: gate.name.clone(),
                        kind: GateKind::SrLatch,
                        inputs: vec![
                            graph.net_name(s).to_string(),
                            graph.net_name(r).to_string(),
                        ],
                        output: graph.net_name(q).to_string(),
                        init: Some(MembraneState::Up),
                    },
                });
                break;
            }
        }
    }

    candidates.sort_by(|a, b| a.anchor.cmp(&b.anchor).then(a.rule.cmp(&b.rule)));
    candidates
}

fn apply(graph: &CircuitGraph, candidate: &Candidate) -> Result<CircuitGraph, BuildError> {
    let mut gates: Vec<GateByName> = graph
        .gates()
        .iter()
        .filter(|g| !candidate.remove.contains(&g.name))
        .map(|g| GateByName::of(graph, g))
        .collect();
    gates.push(candidate.add.clone());
    rebuild(graph, &gates)
}

/// Applies rules to a fixed point. `pick` chooses among the current
/// candidates (deterministic callers pass `|_| 0`); the candidate list is
/// ordered by gate position, then rule priority.
pub fn rewrite_to_fixed_point(
    graph: &CircuitGraph,
    mut pick: impl FnMut(usize) -> usize,
) -> Result<(CircuitGraph, Vec<AppliedRewrite>), OptimizeError> {
    let mut current = graph.clone();
    let mut applied = Vec::new();
    loop {
        let candidates = find_candidates(&current);
        if candidates.is_empty() {
            return Ok((current, applied));
        }
        let chosen = &candidates[pick(candidates.len()).min(candidates.len() - 1)];
        let before = current.gates().len();
        current = apply(&current, chosen).map_err(OptimizeError::Build)?;
        applied.push(AppliedRewrite {
            rule: chosen.rule.rule().name,
            site: chosen.site.clone(),
            total_before: before,
            total_after: current.gates().len(),
        });
    }
}

/// Gate counts before and after, the rewrites applied in order, and the
/// whole-circuit equivalence verdict. `succeeded` is true only when the
/// verdict is equivalent.
#[derive(Debug, Clone)]
pub struct RewriteReport {
    pub before: GateCounts,
    pub after: GateCounts,
    pub applied: Vec<AppliedRewrite>,
    pub verification: EquivalenceReport,
    pub succeeded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizeError {
    WrongLevel,
    Elaborate(ElaborateError),
    Build(BuildError),
    Analysis(AnalysisError),
}

impl fmt::Display for OptimizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizeError::WrongLevel => write!(f, "optimize requires a gate-level graph"),
            OptimizeError::Elaborate(e) => write!(f, "{e}"),
            OptimizeError::Build(e) => write!(f, "{e}"),
            OptimizeError::Analysis(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for OptimizeError {}

impl From<ElaborateError> for OptimizeError {
    fn from(e: ElaborateError) -> Self {
        OptimizeError::Elaborate(e)
    }
}

impl From<AnalysisError> for OptimizeError {
    fn from(e: AnalysisError) -> Self {
        OptimizeError::Analysis(e)
    }
}

/// Expands macros, rewrites to a fixed point in deterministic order, then
/// verifies the result against the input circuit: exhaustively when both
/// are combinational, by bounded sequences when a set-reset element is
/// involved. On verification failure the original circuit is returned and
/// the report says so.
pub fn optimize(graph: &CircuitGraph) -> Result<(CircuitGraph, RewriteReport), OptimizeError> {
    if graph.level() != Level::Gate {
        return Err(OptimizeError::WrongLevel);
    }
    let before = gate_count(graph)?;
    let expanded = expand_macros(graph)?;
    let (rewritten, applied) = rewrite_to_fixed_point(&expanded, |_| 0)?;

    let sequential = rewritten
        .gates()
        .iter()
        .chain(expanded.gates())
        .any(|g| g.kind == GateKind::SrLatch);
    let verification = if sequential {
        equiv_seq(graph, &rewritten, DEFAULT_SEQUENCE_LENGTH)?
    } else {
        equiv_comb(graph, &rewritten)?
    };

    if verification.is_equivalent() {
        let after = gate_count(&rewritten)?;
        Ok((
            rewritten,
            RewriteReport {
                before,
                after,
                applied,
                verification,
                succeeded: true,
            },
        ))
    } else {
        let after = before.clone();
        Ok((
            graph.clone(),
            RewriteReport {
                before,
                after,
                applied,
                verification,
                succeeded: false,
            },
        ))
    }
}
