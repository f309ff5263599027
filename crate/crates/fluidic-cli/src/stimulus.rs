//! The stimulus `.csv` format: comma-separated, LF line endings, one
//! header row `tick,<signal>,...` followed by strictly increasing ticks.
//!
//! A cell is `0` or `1` (converted through the circuit's rails), a kPa
//! literal such as `153` or `72.5`, or `hold` to repeat the signal's
//! previous value. Every declared input must appear in the header and the
//! first row must assign tick 0.

use std::collections::BTreeMap;

use fluidic_core::netlist::{CircuitGraph, NetId};
use fluidic_core::pressure::{logic_to_kpa, LogicLevel, PressureSignal, MAX_SYSTEM_KPA};
use fluidic_core::sim::{Stimulus, StimulusStep};

use crate::parser::{ParseError, ParseErrorKind};

fn err<T>(line: usize, column: usize, kind: ParseErrorKind) -> Result<T, ParseError> {
    Err(ParseError { line, column, kind })
}

/// Parses a stimulus table against a circuit's declared inputs.
pub fn parse_stimulus(text: &str, graph: &CircuitGraph) -> Result<Stimulus, ParseError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((idx, line)) => {
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                break (idx + 1, trimmed);
            }
            None => return err(1, 1, ParseErrorKind::Syntax("empty stimulus".into())),
        }
    };

    let (header_line, header_text) = header;
    let columns: Vec<&str> = header_text.split(',').map(|c| c.trim()).collect();
    if columns.first() != Some(&"tick") {
        return err(
            header_line,
            1,
            ParseErrorKind::Syntax("header must start with tick".into()),
        );
    }
    let mut nets: Vec<NetId> = Vec::new();
    for name in &columns[1..] {
        match graph.net_id(name) {
            Some(net) if graph.is_input(net) => {
                if nets.contains(&net) {
                    return err(header_line, 1, ParseErrorKind::Duplicate((*name).into()));
                }
                nets.push(net);
            }
            _ => {
                return err(
                    header_line,
                    1,
                    ParseErrorKind::Syntax(format!("unknown signal {name:?}")),
                )
            }
        }
    }
    for input in graph.inputs() {
        if !nets.contains(&input) {
            return err(
                header_line,
                1,
                ParseErrorKind::Arity(format!(
                    "input {} is not covered by the stimulus",
                    graph.net_name(input)
                )),
            );
        }
    }

    let rails = graph.rails();
    let mut steps: Vec<StimulusStep> = Vec::new();
    let mut previous: BTreeMap<NetId, PressureSignal> = BTreeMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').map(|c| c.trim()).collect();
        if cells.len() != columns.len() {
            return err(
                line,
                1,
                ParseErrorKind::Arity(format!(
                    "expected {} cells, got {}",
                    columns.len(),
                    cells.len()
                )),
            );
        }
        let tick: u64 = cells[0].parse().map_err(|_| ParseError {
            line,
            column: 1,
            kind: ParseErrorKind::Number(format!("bad tick {:?}", cells[0])),
        })?;
        if let Some(last) = steps.last() {
            if tick <= last.tick {
                return err(
                    line,
                    1,
                    ParseErrorKind::Syntax(format!(
                        "ticks must be strictly increasing ({} after {})",
                        tick, last.tick
                    )),
                );
            }
        } else if tick != 0 {
            return err(line, 1, ParseErrorKind::Syntax("first row must be tick 0".into()));
        }

        let mut values = BTreeMap::new();
        for (net, cell) in nets.iter().zip(&cells[1..]) {
            let value = match *cell {
                "0" => logic_to_kpa(LogicLevel::Low, rails).expect("rail"),
                "1" => logic_to_kpa(LogicLevel::High, rails).expect("rail"),
                "hold" => match previous.get(net) {
                    Some(p) => *p,
                    None => {
                        return err(
                            line,
                            1,
                            ParseErrorKind::Syntax("hold in the first row".into()),
                        )
                    }
                },
                literal => {
                    let kpa: f64 = literal.parse().map_err(|_| ParseError {
                        line,
                        column: 1,
                        kind: ParseErrorKind::Number(format!("bad value {literal:?}")),
                    })?;
                    if !kpa.is_finite() || !(0.0..=MAX_SYSTEM_KPA).contains(&kpa) {
                        return err(
                            line,
                            1,
                            ParseErrorKind::Number(format!(
                                "pressure {literal} kPa outside [0, {MAX_SYSTEM_KPA}]"
                            )),
                        );
                    }
                    PressureSignal::new(kpa).expect("validated")
                }
            };
            previous.insert(*net, value);
            values.insert(*net, value);
        }
        steps.push(StimulusStep { tick, values });
    }
    if steps.is_empty() && !graph.inputs().is_empty() {
        return err(header_line, 1, ParseErrorKind::Syntax("no stimulus rows".into()));
    }
    Ok(Stimulus { steps })
}

/// Renders a logic-level sequence as a replayable stimulus file: one row
/// per step, spaced `gap` ticks apart.
pub fn render_bit_sequence(input_names: &[String], sequence: &[Vec<bool>], gap: u64) -> String {
    let mut out = String::from("tick");
    for name in input_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, step) in sequence.iter().enumerate() {
        out.push_str(&(i as u64 * gap).to_string());
        for bit in step {
            out.push(',');
            out.push(if *bit { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}
