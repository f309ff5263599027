//! Acceptance suite: every headline behavior of the toolkit, each with
//! its tolerance and runtime budget pinned in code. Run with
//! `cargo test -p fluidic-cli --test acceptance -- --nocapture` to see
//! one PASS line per criterion.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::{arb_gate_netlist, arb_netlist, read_circuit};
use fluidic_cli::{
    cmd_margin, cmd_opt, cmd_sim, cmd_sweep, cmd_truth, cmd_verify, parse_netlist,
    serialize_netlist, MarginOptions,
};
use fluidic_core::netlist::{elaborate, gate_count, GateKind};
use fluidic_core::optimize::optimize;
use fluidic_core::pressure::{logic_to_kpa, LogicLevel, PressureSignal};
use fluidic_core::sim::{run, RunStatus, Simulator, Stimulus, StimulusStep};
use fluidic_core::valve::{tube_states, Stability};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn timed<T>(budget: Duration, label: &str, body: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let value = body();
    let elapsed = start.elapsed();
    assert!(
        elapsed <= budget,
        "criterion {label} exceeded its {budget:?} budget ({elapsed:?})"
    );
    println!("PASS {label} in {elapsed:?}");
    value
}

/// Parses the final tick's rows of a waveform CSV into signal -> logic.
fn final_logic(csv: &str) -> BTreeMap<String, String> {
    let data_rows: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("tick,"))
        .collect();
    let last_tick = data_rows
        .last()
        .and_then(|l| l.split(',').next())
        .expect("waveform has rows")
        .to_string();
    data_rows
        .iter()
        .filter(|l| l.starts_with(&format!("{last_tick},")))
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[1].to_string(), cells[3].to_string())
        })
        .collect()
}

#[test]
fn criterion_01_hysteresis_curve() {
    timed(Duration::from_secs(1), "criterion 1: hysteresis curve 134/56, width 78", || {
        let csv = cmd_sweep(134.0, 56.0, 160.0, 1.0).unwrap();
        assert_eq!(csv.exit_code, 0);
        let points: Vec<(f64, f64)> = csv
            .payload
            .lines()
            .skip(1)
            .map(|l| {
                let (c, o) = l.split_once(',').unwrap();
                (c.parse().unwrap(), o.parse().unwrap())
            })
            .collect();
        let rising = points.iter().find(|(_, o)| *o == 0.0).expect("drops to 0").0;
        let falling = points
            .iter()
            .skip_while(|(_, o)| *o != 0.0)
            .find(|(_, o)| *o == 160.0)
            .expect("returns to supply")
            .0;
        assert_eq!(rising, 134.0, "output must drop at control >= 134 kPa");
        assert_eq!(falling, 56.0, "output must return at control <= 56 kPa");
        assert!((rising - falling - 78.0).abs() <= 1.0, "width within one 1 kPa step");
    });
}

#[test]
fn criterion_02_inhibit_truth_table() {
    timed(Duration::from_secs(1), "criterion 2: INHIBIT truth table", || {
        let out = cmd_truth(&read_circuit("inhibit.fnl"), 256).unwrap();
        assert_eq!(out.payload, "A,B,Q\n0,0,0\n0,1,1\n1,0,0\n1,1,0\n");
    });
}

#[test]
fn criterion_03_xor_reduction() {
    timed(Duration::from_secs(1), "criterion 3: XOR 5 -> 3 gates, equivalent", || {
        let out = cmd_opt(&read_circuit("xor5.fnl")).unwrap();
        assert_eq!(out.exit_code, 0, "verification must succeed");
        assert!(out.report_text.contains("total 5 -> 3"), "{}", out.report_text);
        assert!(out.report_text.contains("Equivalent"), "{}", out.report_text);
        let optimized = parse_netlist(&out.netlist).unwrap();
        let counts = gate_count(&optimized).unwrap();
        assert_eq!(counts.total, 3);
        assert_eq!(counts.count(GateKind::Inhibit), 2);
        assert_eq!(counts.count(GateKind::Or), 1);
    });
}

#[test]
fn criterion_04_xor_demonstration() {
    timed(Duration::from_secs(1), "criterion 4: XOR(1,1) settles LOW", || {
        let out = cmd_sim(&read_circuit("xor3.fnl"), &read_circuit("xor_11.csv"), 10_000).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(out.payload.contains("# status=Settled"), "must settle");
        assert_eq!(final_logic(&out.payload)["Q"], "0", "Q must be LOW for A=1, B=1");
    });
}

#[test]
fn criterion_05_dlatch_reduction() {
    timed(Duration::from_secs(10), "criterion 5: D-latch 6 -> 3 elements, equivalent", || {
        let out = cmd_opt(&read_circuit("dlatch6.fnl")).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(out.report_text.contains("total 6 -> 3"), "{}", out.report_text);
        let optimized = parse_netlist(&out.netlist).unwrap();
        let counts = gate_count(&optimized).unwrap();
        assert_eq!(counts.total, 3);
        assert_eq!(counts.count(GateKind::And), 1);
        assert_eq!(counts.count(GateKind::Inhibit), 1);
        assert_eq!(counts.count(GateKind::SrLatch), 1);

        // All 256 (D, CLK) sequences of length 4.
        let verify = cmd_verify(
            &read_circuit("dlatch6.fnl"),
            &read_circuit("dlatch3.fnl"),
            Some(4),
        )
        .unwrap();
        assert_eq!(verify.exit_code, 0, "{}", verify.report);
        assert!(verify.report.starts_with("Equivalent"));
    });
}

#[test]
fn criterion_06_dlatch_behavior() {
    timed(Duration::from_secs(10), "criterion 6: D-latch writes on CLK, holds on !CLK", || {
        // D = 1, CLK = 1 settles HIGH.
        let set = cmd_sim(&read_circuit("dlatch3.fnl"), &read_circuit("dlatch_set.csv"), 10_000)
            .unwrap();
        assert!(set.payload.contains("# status=Settled"));
        assert_eq!(final_logic(&set.payload)["Q"], "1", "Q must go HIGH on D=1, CLK=1");

        // Set then hold while D toggles.
        let out = cmd_sim(&read_circuit("dlatch3.fnl"), &read_circuit("dlatch_hold.csv"), 10_000)
            .unwrap();
        assert_eq!(final_logic(&out.payload)["Q"], "1", "Q retained through CLK=0 D toggles");

        // Exhaustive: every length-4 sequence matches the behavioral
        // latch q' = if clk { d } else { q } on both implementations.
        for fixture in ["dlatch6.fnl", "dlatch3.fnl"] {
            let g = parse_netlist(&read_circuit(fixture)).unwrap();
            let v = elaborate(&g).unwrap();
            let d = v.net_id("D").unwrap();
            let clk = v.net_id("CLK").unwrap();
            let q = v.net_id("Q").unwrap();
            let rails = *v.rails();
            let rail = |bit: bool| {
                logic_to_kpa(if bit { LogicLevel::High } else { LogicLevel::Low }, &rails).unwrap()
            };
            for code in 0u32..256 {
                let mut sim = Simulator::new(&v).unwrap();
                let mut expect = false;
                for step in 0..4 {
                    let sym = (code >> (2 * step)) & 0b11;
                    let (bd, bclk) = (sym & 1 == 1, sym & 2 == 2);
                    if bclk {
                        expect = bd;
                    }
                    let inputs = BTreeMap::from([(d, rail(bd)), (clk, rail(bclk))]);
                    let mut last = LogicLevel::Undefined;
                    for _ in 0..16 {
                        let sol = sim.tick(&inputs).unwrap();
                        last = sim.logic(&sol)[q.index()];
                    }
                    let want = if expect { LogicLevel::High } else { LogicLevel::Low };
                    assert_eq!(last, want, "{fixture} code {code} step {step}");
                }
            }
        }
    });
}

#[test]
fn criterion_07_bistable_memory() {
    timed(Duration::from_secs(1), "criterion 7: bistable retains, monostable forgets", || {
        // Set, drop all inputs, and watch Q for >= 100 ticks.
        let out = cmd_sim(&read_circuit("sr_latch.fnl"), &read_circuit("sr_hold.csv"), 10_000)
            .unwrap();
        assert!(out.payload.contains("# status=Settled"));
        let mut retained = 0u64;
        for line in out.payload.lines().filter(|l| l.contains(",Q,")) {
            let cells: Vec<&str> = line.split(',').collect();
            let tick: u64 = cells[0].parse().unwrap();
            if tick >= 10 {
                assert_eq!(cells[3], "1", "Q lost at tick {tick}");
                retained += 1;
            }
        }
        assert!(retained >= 100, "observed only {retained} retention ticks");

        // The same wiring with a monostable membrane loses the bit.
        let gate = parse_netlist(&read_circuit("sr_latch.fnl")).unwrap();
        let mut mono = elaborate(&gate).unwrap();
        mono.valves_mut()[0].spec.stability = Stability::Monostable;
        let s = mono.net_id("S").unwrap();
        let r = mono.net_id("R").unwrap();
        let q = mono.net_id("Q").unwrap();
        let high = PressureSignal::new(150.0).unwrap();
        let low = PressureSignal::ATMOSPHERE;
        let stim = Stimulus {
            steps: vec![
                StimulusStep { tick: 0, values: BTreeMap::from([(s, high), (r, low)]) },
                StimulusStep { tick: 5, values: BTreeMap::from([(s, low), (r, low)]) },
            ],
        };
        let wave = run(&mono, &stim, 200).unwrap();
        assert!(matches!(wave.status, RunStatus::Settled { .. }));
        assert_eq!(wave.last().logic[q.index()], LogicLevel::Low, "monostable must forget");
    });
}

#[test]
fn criterion_08_ring_oscillator() {
    timed(Duration::from_secs(1), "criterion 8: ring oscillates with period 6", || {
        let out = cmd_sim(&read_circuit("ring3.fnl"), &read_circuit("ring_kick.csv"), 10_000)
            .unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(
            out.payload.trim_end().ends_with("# status=Oscillating period=6"),
            "{}",
            out.payload.lines().last().unwrap_or("")
        );
    });
}

#[test]
fn criterion_09_actuation_margin() {
    timed(Duration::from_secs(10), "criterion 9: margins at 153 and 134 kPa", || {
        let netlist = read_circuit("not.fnl");
        let at = |p_high: f64, trials: u64| {
            let out = cmd_margin(
                &netlist,
                &MarginOptions {
                    p_high_kpa: p_high,
                    trials,
                    seed: 42,
                    stimulus: None,
                    disturb_kpa: None,
                },
            )
            .unwrap();
            out.text
                .lines()
                .find_map(|l| l.strip_prefix("pass_fraction="))
                .unwrap()
                .parse::<f64>()
                .unwrap()
        };
        assert_eq!(at(153.0, 1000), 1.0, "every valve actuates at 153 kPa");

        let fraction = at(134.0, 10_000);
        let analytic: f64 = 31.0 / 50.0;
        let sigma = (analytic * (1.0 - analytic) / 10_000.0f64).sqrt();
        assert!(
            (fraction - analytic).abs() <= 3.0 * sigma,
            "pass fraction {fraction} vs analytic {analytic} +- {}",
            3.0 * sigma
        );
    });
}

#[test]
fn criterion_10_property_suites() {
    timed(Duration::from_secs(60), "criterion 10: property suites", || {
        // Parser round-trip isomorphism, >= 1000 generated netlists.
        let mut runner = TestRunner::new(Config {
            cases: 1000,
            failure_persistence: None,
            ..Config::default()
        });
        runner
            .run(&arb_netlist(), |g| {
                let text = serialize_netlist(&g);
                let parsed = parse_netlist(&text)
                    .map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
                prop_assert!(g.isomorphic(&parsed), "round trip broke isomorphism:\n{text}");
                Ok(())
            })
            .unwrap();

        // Optimizer soundness over a randomized pool: every success
        // carries an Equivalent verdict and never grows the circuit.
        let mut runner = TestRunner::new(Config {
            cases: 40,
            failure_persistence: None,
            ..Config::default()
        });
        runner
            .run(&arb_gate_netlist(), |g| {
                let (_, report) = optimize(&g).map_err(|e| TestCaseError::fail(e.to_string()))?;
                prop_assert!(report.succeeded);
                prop_assert!(report.verification.is_equivalent());
                prop_assert!(report.after.total <= report.before.total);
                Ok(())
            })
            .unwrap();

        // Determinism: byte-identical reruns of the same commands.
        let sim1 = cmd_sim(&read_circuit("ring3.fnl"), &read_circuit("ring_kick.csv"), 10_000)
            .unwrap();
        let sim2 = cmd_sim(&read_circuit("ring3.fnl"), &read_circuit("ring_kick.csv"), 10_000)
            .unwrap();
        assert_eq!(sim1, sim2);
        let margin_options = MarginOptions {
            p_high_kpa: 140.0,
            trials: 500,
            seed: 11,
            stimulus: None,
            disturb_kpa: None,
        };
        let m1 = cmd_margin(&read_circuit("xor3.fnl"), &margin_options).unwrap();
        let m2 = cmd_margin(&read_circuit("xor3.fnl"), &margin_options).unwrap();
        assert_eq!(m1.text, m2.text);
        assert_eq!(m1.csv, m2.csv);

        // Complementarity: across random circuits and inputs, every valve
        // has exactly one open tube at every tick.
        let mut runner = TestRunner::new(Config {
            cases: 32,
            failure_persistence: None,
            ..Config::default()
        });
        runner
            .run(
                &(arb_gate_netlist(), proptest::collection::vec(prop::bool::ANY, 3)),
                |(g, bits)| {
                    let v = elaborate(&g).map_err(|e| TestCaseError::fail(e.to_string()))?;
                    let rails = *v.rails();
                    let values: BTreeMap<_, _> = v
                        .inputs()
                        .iter()
                        .zip(bits.iter().cycle())
                        .map(|(net, bit)| {
                            let level = if *bit { LogicLevel::High } else { LogicLevel::Low };
                            (*net, logic_to_kpa(level, &rails).unwrap())
                        })
                        .collect();
                    let wave = run(&v, &Stimulus::constant(values), 200)
                        .map_err(|e| TestCaseError::fail(e.to_string()))?;
                    for record in &wave.records {
                        for state in &record.membranes {
                            let tubes = tube_states(*state);
                            prop_assert_ne!(tubes.top, tubes.bottom);
                        }
                    }
                    Ok(())
                },
            )
            .unwrap();
    });
}
