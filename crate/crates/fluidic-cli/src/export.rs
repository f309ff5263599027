//! Text and CSV renderings of simulation and analysis results. All output
//! is deterministic: byte-identical inputs and seeds give byte-identical
//! bytes out.

use std::fmt::Write as _;

use fluidic_core::analysis::{EquivalenceReport, TruthTable};
use fluidic_core::netlist::CircuitGraph;
use fluidic_core::optimize::RewriteReport;
use fluidic_core::sim::Waveform;
use fluidic_core::tolerance::MarginReport;

/// Waveform CSV: `tick,signal,pressure_kpa,logic`, one row per net per
/// tick in net declaration order, closed by a status comment line.
pub fn waveform_csv(graph: &CircuitGraph, waveform: &Waveform) -> String {
    let mut out = String::from("tick,signal,pressure_kpa,logic\n");
    for record in &waveform.records {
        for (net, name) in graph.net_names() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                record.tick,
                name,
                record.solution.pressure(net),
                record.logic[net.index()],
            );
        }
    }
    let _ = writeln!(out, "# status={}", waveform.status);
    out
}

/// Truth-table CSV: input names then output names, rows of 0/1 levels.
pub fn truth_csv(table: &TruthTable) -> String {
    let mut out = String::new();
    let header: Vec<&str> = table
        .inputs
        .iter()
        .chain(table.outputs.iter())
        .map(|s| s.as_str())
        .collect();
    let _ = writeln!(out, "{}", header.join(","));
    for row in &table.rows {
        let mut cells: Vec<String> = row.inputs.iter().map(|b| u8::from(*b).to_string()).collect();
        cells.extend(row.outputs.iter().map(|l| l.to_string()));
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Hysteresis sweep CSV: `control_kpa,output_kpa`.
pub fn sweep_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("control_kpa,output_kpa\n");
    for (control, output) in points {
        let _ = writeln!(out, "{control},{output}");
    }
    out
}

/// Human-readable rewrite report, ending in the `total N -> M` line.
pub fn rewrite_report_text(report: &RewriteReport) -> String {
    let mut out = String::new();
    for applied in &report.applied {
        let _ = writeln!(
            out,
            "rule {} site {}: total {} -> {}",
            applied.rule, applied.site, applied.total_before, applied.total_after
        );
    }
    let _ = writeln!(out, "verification: {}", report.verification);
    let _ = writeln!(out, "total {} -> {}", report.before.total, report.after.total);
    if !report.succeeded {
        let _ = writeln!(out, "status: reverted (verification failed, original kept)");
    }
    out
}

/// Machine-readable rewrite log: `rule,site,count_before,count_after`.
pub fn rewrite_report_csv(report: &RewriteReport) -> String {
    let mut out = String::from("rule,site,count_before,count_after\n");
    for applied in &report.applied {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            applied.rule, applied.site, applied.total_before, applied.total_after
        );
    }
    out
}

/// Equivalence verdict as a one-line-per-fact text report.
pub fn verdict_text(report: &EquivalenceReport) -> String {
    let mut out = String::new();
    match &report.counterexample {
        None => {
            let _ = writeln!(out, "Equivalent method={}", report.method);
        }
        Some(c) => {
            let _ = writeln!(out, "Counterexample method={}", report.method);
            let _ = writeln!(out, "inputs: {}", c.input_names.join(","));
            for (i, step) in c.sequence.iter().enumerate() {
                let bits: Vec<String> = step.iter().map(|b| u8::from(*b).to_string()).collect();
                let _ = writeln!(out, "step {i}: {}", bits.join(","));
            }
            let _ = writeln!(out, "diverges at step {}", c.step);
            let levels = |v: &[fluidic_core::pressure::LogicLevel]| {
                v.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
            };
            let _ = writeln!(out, "outputs: {}", c.output_names.join(","));
            let _ = writeln!(out, "left: {}", levels(&c.left_outputs));
            let _ = writeln!(out, "right: {}", levels(&c.right_outputs));
            if let Some(note) = &c.non_settling {
                let _ = writeln!(out, "note: {note}");
            }
        }
    }
    out
}

/// Margin report as `key=value` lines for scripting.
pub fn margin_text(report: &MarginReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "trials={}", report.trials);
    let _ = writeln!(out, "passes={}", report.passes);
    let _ = writeln!(out, "pass_fraction={}", report.pass_fraction);
    let _ = writeln!(out, "wilson_low={}", report.wilson_low);
    let _ = writeln!(out, "wilson_high={}", report.wilson_high);
    let _ = writeln!(out, "no_snap={}", report.failures.no_snap);
    let _ = writeln!(out, "spurious_snap={}", report.failures.spurious_snap);
    let _ = writeln!(out, "logic_mismatch={}", report.failures.logic_mismatch);
    let _ = writeln!(out, "redraws={}", report.redraws);
    for (valve, margin) in &report.worst_margin_kpa {
        let _ = writeln!(out, "margin[{valve}]={margin}");
    }
    out
}

/// Per-trial outcomes: `trial,pass,failure_category`.
pub fn margin_csv(report: &MarginReport) -> String {
    let mut out = String::from("trial,pass,failure_category\n");
    for (i, outcome) in report.outcomes.iter().enumerate() {
        let category = outcome.failure.map(|f| f.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", i, u8::from(outcome.pass), category);
    }
    out
}
