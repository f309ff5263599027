//! Shared helpers for the integration suites: fixture paths and random
//! netlist generators whose outputs are valid by construction.
#![allow(dead_code)] // each test binary uses a different subset

use std::path::PathBuf;

use fluidic_core::netlist::{CircuitGraph, GateKind, Level, SnapDefaults, ValvePorts};
use fluidic_core::pressure::{PressureSignal, RailConfig};
use fluidic_core::valve::{MembraneState, Stability, ValveSpec};
use proptest::prelude::*;

/// Absolute path of a fixture under the repository's `circuits/` directory.
pub fn circuit_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../circuits")
        .join(name)
}

pub fn read_circuit(name: &str) -> String {
    let path = circuit_path(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn arb_rails() -> impl Strategy<Value = RailConfig> {
    prop_oneof![
        3 => Just(RailConfig::default()),
        1 => (90.0f64..120.0, 150.0f64..200.0).prop_map(|(threshold, supply)| RailConfig {
            p_supply: PressureSignal::new(supply).unwrap(),
            p_high: PressureSignal::new(supply - 5.0).unwrap(),
            p_low: PressureSignal::ATMOSPHERE,
            logic_threshold: PressureSignal::new(threshold).unwrap(),
        }),
    ]
}

fn arb_snap() -> impl Strategy<Value = SnapDefaults> {
    prop_oneof![
        3 => Just(SnapDefaults::default()),
        1 => (80.0f64..140.0, 20.0f64..70.0).prop_map(|(st, sb)| SnapDefaults {
            snap_through_kpa: st,
            snap_back_kpa: sb.min(st - 1.0),
        }),
    ]
}

/// Random gate-level netlist: a DAG over up to three inputs, with the
/// occasional macro gate and non-default params.
pub fn arb_gate_netlist() -> impl Strategy<Value = CircuitGraph> {
    let gate = (0usize..7, 0usize..16, 0usize..16);
    (
        proptest::collection::vec(gate, 1..8),
        2usize..4,
        arb_rails(),
        arb_snap(),
    )
        .prop_map(|(gates, n_inputs, rails, snap)| {
            let mut g = CircuitGraph::new(Level::Gate);
            g.set_rails(rails);
            g.set_snap_defaults(snap);
            let mut nets = Vec::new();
            for name in ["A", "B", "C"].iter().take(n_inputs) {
                let id = g.intern_net(name).unwrap();
                g.add_input(id);
                nets.push(id);
            }
            for (i, (kind, x, y)) in gates.iter().enumerate() {
                let kind = [
                    GateKind::Not,
                    GateKind::Buffer,
                    GateKind::And,
                    GateKind::Or,
                    GateKind::Inhibit,
                    GateKind::Xor5,
                    GateKind::Xor3,
                ][*kind];
                let out = g.intern_net(&format!("n{i}")).unwrap();
                let inputs = match kind.arity() {
                    1 => vec![nets[x % nets.len()]],
                    _ => vec![nets[x % nets.len()], nets[y % nets.len()]],
                };
                g.add_gate(format!("g{i}"), kind, inputs, out, None).unwrap();
                nets.push(out);
            }
            let q = *nets.last().unwrap();
            g.add_output(q);
            g
        })
}

/// Random valve-level netlist: a chain of inverter-style valves with
/// randomized thresholds, stability and control taps.
pub fn arb_valve_netlist() -> impl Strategy<Value = CircuitGraph> {
    let valve = (1.0f64..250.0, 1.0f64..250.0, prop::bool::ANY, prop::bool::ANY, 0usize..8);
    (proptest::collection::vec(valve, 1..6), arb_rails()).prop_map(|(valves, rails)| {
        let mut g = CircuitGraph::new(Level::Valve);
        g.set_rails(rails);
        let input = g.intern_net("IN").unwrap();
        let supply = g.intern_net("SUPPLY").unwrap();
        let atm = g.intern_net("ATM").unwrap();
        g.add_input(input);
        g.add_fixed_source(supply, rails_supply(&g));
        g.add_fixed_source(atm, PressureSignal::ATMOSPHERE);
        let mut taps = vec![input];
        let mut last = input;
        for (i, (a, b, bistable, start_down, tap)) in valves.iter().enumerate() {
            let (sb, st) = if a < b { (*a, *b) } else { (*b, *a) };
            let st = if st == sb { st + 1.0 } else { st };
            let stability = if *bistable { Stability::Bistable } else { Stability::Monostable };
            let initial = if *bistable && *start_down {
                MembraneState::Down
            } else {
                MembraneState::Up
            };
            let q = g.intern_net(&format!("q{i}")).unwrap();
            let name = format!("v{i}");
            let spec = ValveSpec::new(name.clone(), stability, st, sb).unwrap();
            let ctrl_top = taps[tap % taps.len()];
            g.add_valve(
                name,
                spec,
                initial,
                ValvePorts {
                    ctrl_top,
                    ctrl_bottom: atm,
                    top_in: atm,
                    top_out: q,
                    bot_in: supply,
                    bot_out: q,
                },
            )
            .unwrap();
            taps.push(q);
            last = q;
        }
        g.add_output(last);
        g
    })
}

fn rails_supply(g: &CircuitGraph) -> PressureSignal {
    g.rails().p_supply
}

/// Either level, for round-trip suites.
pub fn arb_netlist() -> impl Strategy<Value = CircuitGraph> {
    prop_oneof![arb_gate_netlist(), arb_valve_netlist()]
}
