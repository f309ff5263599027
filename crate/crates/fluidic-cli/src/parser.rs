//! The `.fnl` netlist text format.
//!
//! Line-oriented, one statement per line, `#` starts a comment:
//!
//! ```text
//! # two-input gate
//! param supply 160
//! source SUPPLY 160
//! source ATM 0
//! input A B
//! output Q
//! gate INHIBIT g1 a=A b=B out=Q
//! valve v1 mode=bistable ctrl_top=S ctrl_bottom=R top_in=SUPPLY \
//!       top_out=Q bot_in=ATM bot_out=Q snap_through=134 snap_back=56 init=up
//! ```
//!
//! (shown wrapped; real statements stay on one line). `param` keys are
//! `supply`, `high`, `low`, `threshold`, `snap_through` and `snap_back`.
//! A `valve` statement may omit `ctrl_bottom`, which then binds to an
//! `ATM` net sourced at 0 kPa. Identifiers match
//! `[A-Za-z_][A-Za-z0-9_]*`; pressures are kPa in `[0, 300]`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use fluidic_core::netlist::{CircuitGraph, GateKind, Level, NetId, Source, ValvePorts};
use fluidic_core::pressure::{PressureSignal, RailConfig, MAX_SYSTEM_KPA};
use fluidic_core::valve::{MembraneState, Stability, ValveSpec};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown keyword {0:?}")]
    UnknownKeyword(String),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("duplicate identifier {0:?}")]
    Duplicate(String),
    #[error("bad number: {0}")]
    Number(String),
    #[error("invalid identifier {0:?}")]
    Identifier(String),
    #[error("netlist validation failed: {0}")]
    Validation(String),
}

/// A parse failure located at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

fn err<T>(line: usize, column: usize, kind: ParseErrorKind) -> Result<T, ParseError> {
    Err(ParseError { line, column, kind })
}

/// A whitespace-delimited token with its 1-based column.
#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    col: usize,
    text: &'a str,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    col: s + 1,
                    text: &line[s..i],
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        let end = line.find('#').unwrap_or(line.len());
        tokens.push(Token {
            col: s + 1,
            text: line[s..end].trim_end(),
        });
    }
    tokens
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_identifier(t: Token<'_>, line: usize) -> Result<&str, ParseError> {
    if is_identifier(t.text) {
        Ok(t.text)
    } else {
        err(line, t.col, ParseErrorKind::Identifier(t.text.to_string()))
    }
}

fn parse_pressure(t: Token<'_>, line: usize) -> Result<PressureSignal, ParseError> {
    let value: f64 = t
        .text
        .parse()
        .map_err(|_| ParseError {
            line,
            column: t.col,
            kind: ParseErrorKind::Number(format!("{:?} is not a number", t.text)),
        })?;
    if !value.is_finite() || !(0.0..=MAX_SYSTEM_KPA).contains(&value) {
        return err(
            line,
            t.col,
            ParseErrorKind::Number(format!(
                "pressure {} kPa outside [0, {MAX_SYSTEM_KPA}]",
                t.text
            )),
        );
    }
    Ok(PressureSignal::new(value).expect("validated"))
}

/// `key=value` pairs with duplicate and unknown-key detection.
struct Pairs<'a> {
    pairs: Vec<(Token<'a>, &'a str, &'a str)>,
    line: usize,
}

impl<'a> Pairs<'a> {
    fn parse(tokens: &[Token<'a>], line: usize) -> Result<Self, ParseError> {
        let mut pairs = Vec::new();
        let mut seen = BTreeSet::new();
        for t in tokens {
            let Some((key, value)) = t.text.split_once('=') else {
                return err(
                    line,
                    t.col,
                    ParseErrorKind::Syntax(format!("expected key=value, got {:?}", t.text)),
                );
            };
            if key.is_empty() || value.is_empty() {
                return err(
                    line,
                    t.col,
                    ParseErrorKind::Syntax(format!("expected key=value, got {:?}", t.text)),
                );
            }
            if !seen.insert(key) {
                return err(line, t.col, ParseErrorKind::Duplicate(key.to_string()));
            }
            pairs.push((*t, key, value));
        }
        Ok(Pairs { pairs, line })
    }

    fn take(&mut self, key: &str) -> Option<(Token<'a>, &'a str)> {
        let i = self.pairs.iter().position(|(_, k, _)| *k == key)?;
        let (t, _, v) = self.pairs.remove(i);
        Some((t, v))
    }

    fn require(&mut self, key: &str, statement: &str, col: usize) -> Result<(Token<'a>, &'a str), ParseError> {
        self.take(key).ok_or(ParseError {
            line: self.line,
            column: col,
            kind: ParseErrorKind::Arity(format!("{statement} is missing {key}=")),
        })
    }

    fn finish(self) -> Result<(), ParseError> {
        if let Some((t, k, _)) = self.pairs.first() {
            return err(self.line, t.col, ParseErrorKind::UnknownKeyword(k.to_string()));
        }
        Ok(())
    }
}

fn net_token(
    graph: &mut CircuitGraph,
    t: Token<'_>,
    value: &str,
    line: usize,
) -> Result<NetId, ParseError> {
    if !is_identifier(value) {
        return err(line, t.col, ParseErrorKind::Identifier(value.to_string()));
    }
    graph.intern_net(value).map_err(|e| ParseError {
        line,
        column: t.col,
        kind: ParseErrorKind::Identifier(e.to_string()),
    })
}

fn build_error(line: usize, column: usize, e: fluidic_core::netlist::BuildError) -> ParseError {
    use fluidic_core::netlist::BuildError;
    let kind = match &e {
        BuildError::DuplicateName(name) => ParseErrorKind::Duplicate(name.clone()),
        BuildError::ArityMismatch { .. } => ParseErrorKind::Arity(e.to_string()),
        BuildError::WrongLevel { .. } => {
            ParseErrorKind::Syntax("cannot mix gate and valve statements".into())
        }
        _ => ParseErrorKind::Syntax(e.to_string()),
    };
    ParseError { line, column, kind }
}

fn init_value(t: Token<'_>, value: &str, line: usize) -> Result<MembraneState, ParseError> {
    match value {
        "up" => Ok(MembraneState::Up),
        "down" => Ok(MembraneState::Down),
        other => err(
            line,
            t.col,
            ParseErrorKind::Syntax(format!("init must be up or down, got {other:?}")),
        ),
    }
}

/// Parses a netlist and validates the resulting graph.
pub fn parse_netlist(text: &str) -> Result<CircuitGraph, ParseError> {
    // The level is decided by the first gate or valve statement; graphs
    // with neither default to gate level.
    let level = text
        .lines()
        .flat_map(|l| tokenize(l).first().map(|t| t.text.to_string()))
        .find_map(|kw| match kw.as_str() {
            "gate" => Some(Level::Gate),
            "valve" => Some(Level::Valve),
            _ => None,
        })
        .unwrap_or(Level::Gate);

    let mut graph = CircuitGraph::new(level);
    let mut rails = RailConfig::default();
    let mut snap = graph.snap_defaults();
    let mut declared: BTreeSet<String> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(raw);
        let Some(keyword) = tokens.first().copied() else {
            continue;
        };
        let rest = &tokens[1..];
        match keyword.text {
            "param" => {
                let [key, value] = rest else {
                    return err(
                        line,
                        keyword.col,
                        ParseErrorKind::Arity("param takes a key and a value".into()),
                    );
                };
                let kpa = parse_pressure(*value, line)?;
                match key.text {
                    "supply" => rails.p_supply = kpa,
                    "high" => rails.p_high = kpa,
                    "low" => rails.p_low = kpa,
                    "threshold" => rails.logic_threshold = kpa,
                    "snap_through" => snap.snap_through_kpa = kpa.kpa(),
                    "snap_back" => snap.snap_back_kpa = kpa.kpa(),
                    other => {
                        return err(line, key.col, ParseErrorKind::UnknownKeyword(other.to_string()))
                    }
                }
            }
            "source" => {
                let [name, value] = rest else {
                    return err(
                        line,
                        keyword.col,
                        ParseErrorKind::Arity("source takes a net name and a pressure".into()),
                    );
                };
                let id = parse_identifier(*name, line)?;
                if !declared.insert(format!("source:{id}")) {
                    return err(line, name.col, ParseErrorKind::Duplicate(id.to_string()));
                }
                let kpa = parse_pressure(*value, line)?;
                let net = net_token(&mut graph, *name, id, line)?;
                graph.add_fixed_source(net, kpa);
            }
            "input" | "output" => {
                if rest.is_empty() {
                    return err(
                        line,
                        keyword.col,
                        ParseErrorKind::Arity(format!("{} takes net names", keyword.text)),
                    );
                }
                for t in rest {
                    let id = parse_identifier(*t, line)?;
                    if !declared.insert(format!("{}:{id}", keyword.text)) {
                        return err(line, t.col, ParseErrorKind::Duplicate(id.to_string()));
                    }
                    let net = net_token(&mut graph, *t, id, line)?;
                    if keyword.text == "input" {
                        graph.add_input(net);
                    } else {
                        graph.add_output(net);
                    }
                }
            }
            "gate" => {
                let [kind, name, ports @ ..] = rest else {
                    return err(
                        line,
                        keyword.col,
                        ParseErrorKind::Arity("gate takes a kind, a name and ports".into()),
                    );
                };
                let Some(gate_kind) = GateKind::from_keyword(kind.text) else {
                    return err(line, kind.col, ParseErrorKind::UnknownKeyword(kind.text.to_string()));
                };
                let gate_name = parse_identifier(*name, line)?;
                let mut pairs = Pairs::parse(ports, line)?;
                let mut inputs = Vec::new();
                for port in gate_kind.input_port_names() {
                    let (t, v) = pairs.require(port, gate_kind.keyword(), keyword.col)?;
                    inputs.push(net_token(&mut graph, t, v, line)?);
                }
                let (out_t, out_v) = pairs.require("out", gate_kind.keyword(), keyword.col)?;
                let output = net_token(&mut graph, out_t, out_v, line)?;
                let init = match pairs.take("init") {
                    Some((t, v)) if gate_kind.has_initial_state() => Some(init_value(t, v, line)?),
                    Some((t, _)) => {
                        return err(
                            line,
                            t.col,
                            ParseErrorKind::Syntax(format!(
                                "{} does not take init=",
                                gate_kind.keyword()
                            )),
                        )
                    }
                    None => gate_kind.has_initial_state().then_some(MembraneState::Up),
                };
                pairs.finish()?;
                graph
                    .add_gate(gate_name, gate_kind, inputs, output, init)
                    .map_err(|e| build_error(line, name.col, e))?;
            }
            "valve" => {
                let [name, ports @ ..] = rest else {
                    return err(
                        line,
                        keyword.col,
                        ParseErrorKind::Arity("valve takes a name and ports".into()),
                    );
                };
                let valve_name = parse_identifier(*name, line)?;
                let mut pairs = Pairs::parse(ports, line)?;

                let (mode_t, mode_v) = pairs.require("mode", "valve", keyword.col)?;
                let stability = match mode_v {
                    "monostable" => Stability::Monostable,
                    "bistable" => Stability::Bistable,
                    other => {
                        return err(
                            line,
                            mode_t.col,
                            ParseErrorKind::Syntax(format!(
                                "mode must be monostable or bistable, got {other:?}"
                            )),
                        )
                    }
                };

                let port = |pairs: &mut Pairs, graph: &mut CircuitGraph, key: &str| {
                    let (t, v) = pairs.require(key, "valve", keyword.col)?;
                    net_token(graph, t, v, line)
                };
                let ctrl_top = port(&mut pairs, &mut graph, "ctrl_top")?;
                let ctrl_bottom = match pairs.take("ctrl_bottom") {
                    Some((t, v)) => net_token(&mut graph, t, v, line)?,
                    None => {
                        // Default control reference: atmosphere.
                        let atm = graph.intern_net("ATM").expect("ATM is a valid name");
                        if !matches!(graph.source_of(atm), Some(Source::Fixed(_))) {
                            graph.add_fixed_source(atm, PressureSignal::ATMOSPHERE);
                        }
                        atm
                    }
                };
                let top_in = port(&mut pairs, &mut graph, "top_in")?;
                let top_out = port(&mut pairs, &mut graph, "top_out")?;
                let bot_in = port(&mut pairs, &mut graph, "bot_in")?;
                let bot_out = port(&mut pairs, &mut graph, "bot_out")?;

                let snap_through = match pairs.take("snap_through") {
                    Some((t, v)) => parse_pressure(Token { col: t.col, text: v }, line)?.kpa(),
                    None => snap.snap_through_kpa,
                };
                let snap_back = match pairs.take("snap_back") {
                    Some((t, v)) => parse_pressure(Token { col: t.col, text: v }, line)?.kpa(),
                    None => snap.snap_back_kpa,
                };
                let initial = match pairs.take("init") {
                    Some((t, v)) => init_value(t, v, line)?,
                    None => MembraneState::Up,
                };
                pairs.finish()?;

                let spec = ValveSpec::new(valve_name, stability, snap_through, snap_back)
                    .map_err(|e| ParseError {
                        line,
                        column: keyword.col,
                        kind: ParseErrorKind::Number(e.to_string()),
                    })?;
                graph
                    .add_valve(
                        valve_name,
                        spec,
                        initial,
                        ValvePorts {
                            ctrl_top,
                            ctrl_bottom,
                            top_in,
                            top_out,
                            bot_in,
                            bot_out,
                        },
                    )
                    .map_err(|e| build_error(line, name.col, e))?;
            }
            other => {
                return err(line, keyword.col, ParseErrorKind::UnknownKeyword(other.to_string()))
            }
        }
    }

    if rails.validate().is_err() {
        return err(
            1,
            1,
            ParseErrorKind::Validation(
                "rails must satisfy p_low < threshold < p_high <= p_supply".into(),
            ),
        );
    }
    graph.set_rails(rails);
    graph.set_snap_defaults(snap);

    let violations = graph.validate();
    if !violations.is_empty() {
        let summary = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return err(1, 1, ParseErrorKind::Validation(summary));
    }
    Ok(graph)
}

fn push_pressure(out: &mut String, kpa: f64) {
    // f64 Display round-trips through parse.
    let _ = write!(out, "{kpa}");
}

/// Renders a graph back to netlist text. The result re-parses to an
/// isomorphic graph; non-default params are emitted explicitly, so an
/// empty default graph serializes to the header comment alone.
pub fn serialize_netlist(graph: &CircuitGraph) -> String {
    let mut out = String::from("# fluidic netlist\n");
    let default_rails = RailConfig::default();
    let rails = graph.rails();
    for (key, value, default) in [
        ("supply", rails.p_supply, default_rails.p_supply),
        ("high", rails.p_high, default_rails.p_high),
        ("low", rails.p_low, default_rails.p_low),
        ("threshold", rails.logic_threshold, default_rails.logic_threshold),
    ] {
        if value != default {
            let _ = write!(out, "param {key} ");
            push_pressure(&mut out, value.kpa());
            out.push('\n');
        }
    }
    let snap = graph.snap_defaults();
    let snap_default = fluidic_core::netlist::SnapDefaults::default();
    for (key, value, default) in [
        ("snap_through", snap.snap_through_kpa, snap_default.snap_through_kpa),
        ("snap_back", snap.snap_back_kpa, snap_default.snap_back_kpa),
    ] {
        if value != default {
            let _ = write!(out, "param {key} ");
            push_pressure(&mut out, value);
            out.push('\n');
        }
    }

    for (net, pressure) in graph.fixed_sources() {
        let _ = write!(out, "source {} ", graph.net_name(net));
        push_pressure(&mut out, pressure.kpa());
        out.push('\n');
    }
    for net in graph.inputs() {
        let _ = writeln!(out, "input {}", graph.net_name(net));
    }
    for net in graph.outputs() {
        let _ = writeln!(out, "output {}", graph.net_name(*net));
    }

    for gate in graph.gates() {
        let _ = write!(out, "gate {} {}", gate.kind.keyword(), gate.name);
        for (port, net) in gate.kind.input_port_names().iter().zip(&gate.inputs) {
            let _ = write!(out, " {port}={}", graph.net_name(*net));
        }
        let _ = write!(out, " out={}", graph.net_name(gate.output));
        if let Some(init) = gate.init {
            let _ = write!(out, " init={}", init_keyword(init));
        }
        out.push('\n');
    }
    for valve in graph.valves() {
        let p = &valve.ports;
        let _ = write!(
            out,
            "valve {} mode={} ctrl_top={} ctrl_bottom={} top_in={} top_out={} bot_in={} bot_out={}",
            valve.name,
            valve.spec.stability,
            graph.net_name(p.ctrl_top),
            graph.net_name(p.ctrl_bottom),
            graph.net_name(p.top_in),
            graph.net_name(p.top_out),
            graph.net_name(p.bot_in),
            graph.net_name(p.bot_out),
        );
        let _ = write!(out, " snap_through=");
        push_pressure(&mut out, valve.spec.snap_through_kpa);
        let _ = write!(out, " snap_back=");
        push_pressure(&mut out, valve.spec.snap_back_kpa);
        let _ = write!(out, " init={}", init_keyword(valve.initial));
        out.push('\n');
    }
    out
}

fn init_keyword(state: MembraneState) -> &'static str {
    match state {
        MembraneState::Up => "up",
        MembraneState::Down => "down",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const XOR3: &str = "\
# optimized XOR from two INHIBIT gates and an OR
source SUPPLY 160
source ATM 0
input A B
output Q
gate INHIBIT g1 a=B b=A out=x1
gate INHIBIT g2 a=A b=B out=x2
gate OR g3 a=x1 b=x2 out=Q
";

    #[test]
    fn parses_xor3() {
        let g = parse_netlist(XOR3).unwrap();
        assert_eq!(g.level(), Level::Gate);
        assert_eq!(g.gates().len(), 3);
        assert_eq!(g.inputs().len(), 2);
        assert_eq!(g.outputs().len(), 1);
    }

    #[test]
    fn minimal_not_circuit() {
        let g = parse_netlist("source SUPPLY 160\ninput A\noutput Q\ngate NOT n1 in=A out=Q\n")
            .unwrap();
        assert_eq!(g.gates().len(), 1);
    }

    #[test]
    fn missing_port_is_an_arity_error_naming_the_line() {
        let e = parse_netlist("input A\ngate NOT n1 in=A\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(matches!(e.kind, ParseErrorKind::Arity(_)), "{e}");
    }

    #[test]
    fn unknown_keyword_and_bad_number() {
        let e = parse_netlist("wires A B\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnknownKeyword(_)));
        let e = parse_netlist("source S xyz\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Number(_)));
        let e = parse_netlist("source S 301\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Number(_)), "pressure cap: {e}");
    }

    #[test]
    fn duplicate_identifiers_rejected() {
        let e = parse_netlist("input A\ninput A\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(matches!(e.kind, ParseErrorKind::Duplicate(_)));
        let e = parse_netlist(
            "input A B\noutput Q R\ngate NOT g in=A out=Q\ngate NOT g in=B out=R\n",
        )
        .unwrap_err();
        assert_eq!(e.line, 4);
        assert!(matches!(e.kind, ParseErrorKind::Duplicate(_)), "{e}");
    }

    #[test]
    fn validation_failures_are_forwarded() {
        // Output never driven.
        let e = parse_netlist("input A\noutput Q\ngate NOT n1 in=A out=X\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Validation(_)), "{e}");
    }

    #[test]
    fn valve_level_round_trip_preserves_thresholds() {
        let text = "\
source SUPPLY 160
source ATM 0
input S
input R
output Q
valve v1 mode=bistable ctrl_top=S ctrl_bottom=R top_in=SUPPLY top_out=Q bot_in=ATM bot_out=Q snap_through=134.5 snap_back=56.25 init=down
";
        let g = parse_netlist(text).unwrap();
        assert_eq!(g.level(), Level::Valve);
        let v = &g.valves()[0];
        assert_eq!(v.spec.snap_through_kpa, 134.5);
        assert_eq!(v.spec.snap_back_kpa, 56.25);
        assert_eq!(v.initial, MembraneState::Down);
        let g2 = parse_netlist(&serialize_netlist(&g)).unwrap();
        assert!(g.isomorphic(&g2));
        assert_eq!(g2.valves()[0].spec.snap_through_kpa, 134.5);
    }

    #[test]
    fn gate_round_trip_is_isomorphic() {
        let g = parse_netlist(XOR3).unwrap();
        let text = serialize_netlist(&g);
        let g2 = parse_netlist(&text).unwrap();
        assert!(g.isomorphic(&g2), "serialized:\n{text}");
    }

    #[test]
    fn empty_graph_serializes_to_header_only() {
        let g = CircuitGraph::new(Level::Gate);
        assert_eq!(serialize_netlist(&g), "# fluidic netlist\n");
    }

    #[test]
    fn ctrl_bottom_defaults_to_atmosphere() {
        let text = "\
source SUPPLY 160
source ATM 0
input A
output Q
valve v1 mode=monostable ctrl_top=A top_in=ATM top_out=Q bot_in=SUPPLY bot_out=Q
";
        let g = parse_netlist(text).unwrap();
        let v = &g.valves()[0];
        assert_eq!(g.net_name(v.ports.ctrl_bottom), "ATM");
    }

    #[test]
    fn mixing_levels_is_a_syntax_error() {
        let e = parse_netlist(
            "source SUPPLY 160\nsource ATM 0\ninput A\noutput Q\n\
             gate NOT n1 in=A out=Q\n\
             valve v1 mode=monostable ctrl_top=A top_in=ATM top_out=Q bot_in=SUPPLY bot_out=Q\n",
        )
        .unwrap_err();
        assert_eq!(e.line, 6);
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)), "{e}");
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let g = parse_netlist("\n# comment\n  # indented comment\ninput A # trailing\noutput Q\ngate BUFFER b1 in=A out=Q\n").unwrap();
        assert_eq!(g.gates().len(), 1);
    }
}
