//! Sequential behavior: set-reset retention, the mono/bistable memory
//! distinction, D-latch transparency and hold, and the bounded
//! equivalence of the two D-latch forms against a behavioral oracle.

use std::collections::BTreeMap;

use fluidic_core::analysis::equiv_seq;
use fluidic_core::netlist::{elaborate, CircuitGraph, GateKind, Level};
use fluidic_core::pressure::{logic_to_kpa, LogicLevel, PressureSignal};
use fluidic_core::sim::Simulator;
use fluidic_core::valve::{MembraneState, Stability};

fn latch_graph(kind: GateKind, a: &str, b: &str) -> CircuitGraph {
    let mut g = CircuitGraph::new(Level::Gate);
    let an = g.intern_net(a).unwrap();
    let bn = g.intern_net(b).unwrap();
    let q = g.intern_net("Q").unwrap();
    g.add_input(an);
    g.add_input(bn);
    g.add_output(q);
    let init = kind.has_initial_state().then_some(MembraneState::Up);
    g.add_gate("m", kind, vec![an, bn], q, init).unwrap();
    g
}

/// Drives (bit, bit) inputs, settles, and reads Q's logic level.
fn apply(
    sim: &mut Simulator<'_>,
    names: (&str, &str),
    bits: (bool, bool),
    budget: u64,
) -> LogicLevel {
    let g = sim.graph();
    let rails = *g.rails();
    let to_p = |bit: bool| {
        logic_to_kpa(if bit { LogicLevel::High } else { LogicLevel::Low }, &rails).unwrap()
    };
    let mut inputs = BTreeMap::new();
    inputs.insert(g.net_id(names.0).unwrap(), to_p(bits.0));
    inputs.insert(g.net_id(names.1).unwrap(), to_p(bits.1));
    let q = g.net_id("Q").unwrap();
    let mut last = LogicLevel::Undefined;
    for _ in 0..budget {
        let sol = sim.tick(&inputs).unwrap();
        last = sim.logic(&sol)[q.index()];
    }
    last
}

#[test]
fn sr_latch_retains_after_set_and_mono_substitute_loses_state() {
    let gate = latch_graph(GateKind::SrLatch, "S", "R");
    let bistable = elaborate(&gate).unwrap();

    let mut sim = Simulator::new(&bistable).unwrap();
    assert_eq!(apply(&mut sim, ("S", "R"), (true, false), 8), LogicLevel::High);
    // Remove all control pressure; the bistable membrane keeps its place.
    for _ in 0..100 {
        assert_eq!(apply(&mut sim, ("S", "R"), (false, false), 1), LogicLevel::High);
    }

    // Same wiring, monostable membrane: state is lost with the input.
    let mut mono = bistable.clone();
    mono.valves_mut()[0].spec.stability = Stability::Monostable;
    let mut sim = Simulator::new(&mono).unwrap();
    assert_eq!(apply(&mut sim, ("S", "R"), (true, false), 8), LogicLevel::High);
    assert_eq!(apply(&mut sim, ("S", "R"), (false, false), 8), LogicLevel::Low);
}

#[test]
fn sr_latch_reset_and_simultaneous_inputs_hold() {
    let gate = latch_graph(GateKind::SrLatch, "S", "R");
    let g = elaborate(&gate).unwrap();
    let mut sim = Simulator::new(&g).unwrap();
    assert_eq!(apply(&mut sim, ("S", "R"), (true, false), 8), LogicLevel::High);
    assert_eq!(apply(&mut sim, ("S", "R"), (false, true), 8), LogicLevel::Low);
    // S = R = HIGH cancels the differential: the membrane holds. This is
    // the documented forbidden-input behavior of the valve latch.
    assert_eq!(apply(&mut sim, ("S", "R"), (true, false), 8), LogicLevel::High);
    assert_eq!(apply(&mut sim, ("S", "R"), (true, true), 8), LogicLevel::High);
}

/// Behavioral D-latch: q' = d while clk, else q.
fn oracle_latch(sequence: &[(bool, bool)]) -> Vec<bool> {
    let mut q = false;
    sequence
        .iter()
        .map(|(d, clk)| {
            if *clk {
                q = *d;
            }
            q
        })
        .collect()
}

#[test]
fn both_dlatch_forms_match_the_behavioral_oracle() {
    for kind in [GateKind::DLatch6, GateKind::DLatch3] {
        let g = elaborate(&latch_graph(kind, "D", "CLK")).unwrap();
        // All 256 length-4 (D, CLK) sequences.
        for code in 0u32..256 {
            let sequence: Vec<(bool, bool)> = (0..4)
                .map(|i| {
                    let sym = (code >> (2 * i)) & 0b11;
                    (sym & 1 == 1, sym & 2 == 2)
                })
                .collect();
            let expected = oracle_latch(&sequence);
            let mut sim = Simulator::new(&g).unwrap();
            for (step, (d, clk)) in sequence.iter().enumerate() {
                let got = apply(&mut sim, ("D", "CLK"), (*d, *clk), 16);
                let want = if expected[step] { LogicLevel::High } else { LogicLevel::Low };
                assert_eq!(got, want, "{kind} diverges at step {step} of {sequence:?}");
            }
        }
    }
}

#[test]
fn dlatch_forms_are_sequence_equivalent() {
    let six = latch_graph(GateKind::DLatch6, "D", "CLK");
    let three = latch_graph(GateKind::DLatch3, "D", "CLK");
    let report = equiv_seq(&six, &three, 4).unwrap();
    assert!(report.is_equivalent(), "{report}");
}

#[test]
fn dlatch_transparent_while_clk_high_and_frozen_while_low() {
    let g = elaborate(&latch_graph(GateKind::DLatch3, "D", "CLK")).unwrap();
    let mut sim = Simulator::new(&g).unwrap();
    // Transparent: Q tracks D while CLK stays high.
    assert_eq!(apply(&mut sim, ("D", "CLK"), (true, true), 16), LogicLevel::High);
    assert_eq!(apply(&mut sim, ("D", "CLK"), (false, true), 16), LogicLevel::Low);
    assert_eq!(apply(&mut sim, ("D", "CLK"), (true, true), 16), LogicLevel::High);
    // Frozen: CLK low, D toggles, Q keeps its prior state.
    for d in [false, true, false, true] {
        assert_eq!(apply(&mut sim, ("D", "CLK"), (d, false), 16), LogicLevel::High);
    }
}

#[test]
fn counterexamples_replay() {
    // XOR3 against OR: the counterexample must reproduce the divergence.
    let xor = latch_graph(GateKind::Xor3, "A", "B");
    let or = latch_graph(GateKind::Or, "A", "B");
    let report = fluidic_core::analysis::equiv_comb(&xor, &or).unwrap();
    let ce = report.counterexample.expect("xor != or");
    assert_eq!(ce.sequence.len(), 1);

    // Replay through fresh simulators.
    let replay = |g: &CircuitGraph| -> LogicLevel {
        let v = elaborate(g).unwrap();
        let mut sim = Simulator::new(&v).unwrap();
        let rails = *v.rails();
        let mut inputs = BTreeMap::new();
        for (name, bit) in ce.input_names.iter().zip(&ce.sequence[0]) {
            let level = if *bit { LogicLevel::High } else { LogicLevel::Low };
            inputs.insert(v.net_id(name).unwrap(), logic_to_kpa(level, &rails).unwrap());
        }
        let q = v.net_id("Q").unwrap();
        let mut last = LogicLevel::Undefined;
        for _ in 0..16 {
            let sol = sim.tick(&inputs).unwrap();
            last = sim.logic(&sol)[q.index()];
        }
        last
    };
    let left = replay(&xor);
    let right = replay(&or);
    assert_ne!(left, right);
    assert_eq!(vec![left], ce.left_outputs);
    assert_eq!(vec![right], ce.right_outputs);
}

#[test]
fn pressure_rails_differ_but_logic_equivalence_holds() {
    // A buffer chain reaches Q at supply pressure, a double-inverter at
    // rail pressure; sequential comparison uses logic, so they match.
    let mut chain = CircuitGraph::new(Level::Gate);
    {
        let g = &mut chain;
        let a = g.intern_net("A").unwrap();
        let n = g.intern_net("n").unwrap();
        let q = g.intern_net("Q").unwrap();
        g.add_input(a);
        g.add_output(q);
        g.add_gate("b1", GateKind::Buffer, vec![a], n, None).unwrap();
        g.add_gate("b2", GateKind::Buffer, vec![n], q, None).unwrap();
    }
    let mut double_not = CircuitGraph::new(Level::Gate);
    {
        let g = &mut double_not;
        let a = g.intern_net("A").unwrap();
        let n = g.intern_net("n").unwrap();
        let q = g.intern_net("Q").unwrap();
        g.add_input(a);
        g.add_output(q);
        g.add_gate("n1", GateKind::Not, vec![a], n, None).unwrap();
        g.add_gate("n2", GateKind::Not, vec![n], q, None).unwrap();
    }
    let report = fluidic_core::analysis::equiv_comb(&chain, &double_not).unwrap();
    assert!(report.is_equivalent(), "{report}");

    // And one PAPER-anchored check: a buffer passes supply pressure.
    let v = elaborate(&chain).unwrap();
    let mut sim = Simulator::new(&v).unwrap();
    let mut inputs = BTreeMap::new();
    inputs.insert(v.net_id("A").unwrap(), PressureSignal::new(150.0).unwrap());
    for _ in 0..8 {
        sim.tick(&inputs).unwrap();
    }
    let sol = sim.resolve(&inputs);
    assert_eq!(sol.pressure(v.net_id("Q").unwrap()), 160.0);
}
