//! Command-line front end: simulate, enumerate, optimize, verify, sweep
//! and margin-check circuits from `.fnl` netlists and `.csv` stimuli.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fluidic_cli::{
    cmd_margin, cmd_opt, cmd_sim, cmd_sweep, cmd_truth, cmd_verify, CliError, MarginOptions,
};

#[derive(Parser)]
#[command(name = "fluidic", version, about = "Switch-level toolkit for pneumatic logic circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a netlist under a stimulus and emit the waveform CSV.
    Sim {
        netlist: PathBuf,
        /// Stimulus table (.csv) driving the declared inputs.
        #[arg(long)]
        stimulus: PathBuf,
        /// Tick budget before the run is truncated.
        #[arg(long, default_value_t = 10_000)]
        max_ticks: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate the truth table of a combinational netlist as CSV.
    Truth {
        netlist: PathBuf,
        /// Per-row settling budget in ticks.
        #[arg(long, default_value_t = 256)]
        settle_budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize a gate-level netlist; prints the rewrite report.
    Opt {
        netlist: PathBuf,
        /// Write the optimized netlist here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-rewrite CSV log here.
        #[arg(long)]
        report_csv: Option<PathBuf>,
    },
    /// Check two netlists for equivalence.
    Verify {
        netlist1: PathBuf,
        netlist2: PathBuf,
        /// Force bounded-sequence checking at this length.
        #[arg(long)]
        seq: Option<usize>,
        /// Write a replayable counterexample stimulus here.
        #[arg(long)]
        counterexample: Option<PathBuf>,
    },
    /// Emit the quasi-static hysteresis curve of one valve as CSV.
    Sweep {
        /// Snap-through threshold in kPa.
        #[arg(long, default_value_t = 134.0)]
        snap_through: f64,
        /// Snap-back threshold in kPa.
        #[arg(long, default_value_t = 56.0)]
        snap_back: f64,
        /// Supply pressure in kPa; also the ramp peak.
        #[arg(long, default_value_t = 160.0)]
        supply: f64,
        /// Ramp step in kPa.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo actuation margins under valve-to-valve variation.
    Margin {
        netlist: PathBuf,
        /// HIGH rail used for the sampled runs, in kPa.
        #[arg(long, default_value_t = 153.0)]
        p_high: f64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// RNG seed; FLUIDIC_SEED supplies the default.
        #[arg(long, env = "FLUIDIC_SEED", default_value_t = 0)]
        seed: u64,
        /// Check against this stimulus instead of the truth table.
        #[arg(long)]
        stimulus: Option<PathBuf>,
        /// Check state retention under a control disturbance of this
        /// magnitude (kPa) instead of the truth table.
        #[arg(long)]
        disturb: Option<f64>,
        /// Write the per-trial CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write_out(path: Option<&Path>, payload: &str) -> Result<(), String> {
    match path {
        Some(path) => fs::write(path, payload)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}

fn dispatch(command: Command) -> Result<i32, String> {
    let cli_err = |e: CliError| -> (String, i32) { (e.to_string(), e.exit_code()) };
    let run = || -> Result<i32, (String, i32)> {
        match command {
            Command::Sim {
                netlist,
                stimulus,
                max_ticks,
                out,
            } => {
                let netlist_text = read(&netlist).map_err(|m| (m, 2))?;
                let stimulus_text = read(&stimulus).map_err(|m| (m, 2))?;
                let result = cmd_sim(&netlist_text, &stimulus_text, max_ticks).map_err(cli_err)?;
                write_out(out.as_deref(), &result.payload).map_err(|m| (m, 2))?;
                Ok(result.exit_code)
            }
            Command::Truth {
                netlist,
                settle_budget,
                out,
            } => {
                let netlist_text = read(&netlist).map_err(|m| (m, 2))?;
                let result = cmd_truth(&netlist_text, settle_budget).map_err(cli_err)?;
                write_out(out.as_deref(), &result.payload).map_err(|m| (m, 2))?;
                Ok(result.exit_code)
            }
            Command::Opt {
                netlist,
                out,
                report_csv,
            } => {
                let netlist_text = read(&netlist).map_err(|m| (m, 2))?;
                let result = cmd_opt(&netlist_text).map_err(cli_err)?;
                if let Some(path) = out.as_deref() {
                    fs::write(path, &result.netlist)
                        .map_err(|e| (format!("cannot write {}: {e}", path.display()), 2))?;
                }
                if let Some(path) = report_csv.as_deref() {
                    fs::write(path, &result.report_csv)
                        .map_err(|e| (format!("cannot write {}: {e}", path.display()), 2))?;
                }
                print!("{}", result.report_text);
                Ok(result.exit_code)
            }
            Command::Verify {
                netlist1,
                netlist2,
                seq,
                counterexample,
            } => {
                let text1 = read(&netlist1).map_err(|m| (m, 2))?;
                let text2 = read(&netlist2).map_err(|m| (m, 2))?;
                let result = cmd_verify(&text1, &text2, seq).map_err(cli_err)?;
                if let (Some(path), Some(stim)) =
                    (counterexample.as_deref(), &result.counterexample_stimulus)
                {
                    fs::write(path, stim)
                        .map_err(|e| (format!("cannot write {}: {e}", path.display()), 2))?;
                }
                print!("{}", result.report);
                Ok(result.exit_code)
            }
            Command::Sweep {
                snap_through,
                snap_back,
                supply,
                step,
                out,
            } => {
                let result = cmd_sweep(snap_through, snap_back, supply, step).map_err(cli_err)?;
                write_out(out.as_deref(), &result.payload).map_err(|m| (m, 2))?;
                Ok(result.exit_code)
            }
            Command::Margin {
                netlist,
                p_high,
                trials,
                seed,
                stimulus,
                disturb,
                csv,
                out,
            } => {
                let netlist_text = read(&netlist).map_err(|m| (m, 2))?;
                let stimulus_text = match stimulus.as_deref() {
                    Some(path) => Some(read(path).map_err(|m| (m, 2))?),
                    None => None,
                };
                let options = MarginOptions {
                    p_high_kpa: p_high,
                    trials,
                    seed,
                    stimulus: stimulus_text,
                    disturb_kpa: disturb,
                };
                let result = cmd_margin(&netlist_text, &options).map_err(cli_err)?;
                if let Some(path) = csv.as_deref() {
                    fs::write(path, &result.csv)
                        .map_err(|e| (format!("cannot write {}: {e}", path.display()), 2))?;
                }
                write_out(out.as_deref(), &result.text).map_err(|m| (m, 2))?;
                Ok(result.exit_code)
            }
        }
    };
    run().or_else(|(message, code)| {
        eprintln!("error: {message}");
        Ok(code)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
