//! Monte Carlo robustness analysis over valve-to-valve snap-pressure
//! variation.
//!
//! Measured printed valves span about 50 kPa in snap-through pressure and
//! 33 kPa in snap-back pressure. The default model draws both thresholds
//! uniformly over those spans, anchoring the snap-through range at the
//! 153 kPa recommended actuation pressure ([103, 153]) and centering the
//! snap-back range on the nominal 56 kPa ([40, 73]). Trials are
//! deterministic given (seed, trial index) and independent of each other.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::distributions::{Distribution as _, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{truth_table, AnalysisError, TruthTable, DEFAULT_SETTLE_BUDGET};
use crate::netlist::{elaborate, CircuitGraph, ElaborateError, Level};
use crate::pressure::{LogicLevel, PressureSignal};
use crate::sim::{run, RunStatus, SimError, Stimulus, Waveform, DEFAULT_MAX_TICKS};
use crate::valve::{membrane_update, MembraneState, Stability, ValveSpec};

/// Default sampled snap-through range (kPa), anchored at the recommended
/// 153 kPa actuation point with the measured 50 kPa span.
pub const DEFAULT_SNAP_THROUGH_RANGE: (f64, f64) = (103.0, 153.0);
/// Default sampled snap-back range (kPa), centered on the nominal 56 kPa
/// with the measured 33 kPa span.
pub const DEFAULT_SNAP_BACK_RANGE: (f64, f64) = (40.0, 73.0);

/// Safety cap on re-draws per sampling call.
const MAX_REDRAWS: u64 = 1_000_000;

/// Sampling distribution for the snap thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapDistribution {
    /// Uniform over the configured spans, the least-assumptive bounded
    /// choice.
    #[default]
    Uniform,
}

/// Uniform valve-variation model with a reproducible seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceModel {
    pub snap_through_range: (f64, f64),
    pub snap_back_range: (f64, f64),
    pub distribution: SnapDistribution,
    pub rng_seed: u64,
}

impl Default for ToleranceModel {
    fn default() -> Self {
        ToleranceModel {
            snap_through_range: DEFAULT_SNAP_THROUGH_RANGE,
            snap_back_range: DEFAULT_SNAP_BACK_RANGE,
            distribution: SnapDistribution::Uniform,
            rng_seed: 0,
        }
    }
}

impl ToleranceModel {
    pub fn with_seed(seed: u64) -> Self {
        ToleranceModel {
            rng_seed: seed,
            ..ToleranceModel::default()
        }
    }

    fn validate(&self) -> Result<(), ToleranceError> {
        let ranges = [self.snap_through_range, self.snap_back_range];
        for (lo, hi) in ranges {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo <= 0.0 {
                return Err(ToleranceError::ImpossibleRange { lo, hi });
            }
        }
        // Some draw must satisfy snap_back < snap_through.
        if self.snap_back_range.0 >= self.snap_through_range.1 {
            return Err(ToleranceError::ImpossibleRange {
                lo: self.snap_back_range.0,
                hi: self.snap_through_range.1,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToleranceError {
    ImpossibleRange { lo: f64, hi: f64 },
    ExcessiveRedraws,
    /// The check itself is malformed (e.g. truth-table check on a
    /// sequential circuit, or a broken stimulus).
    BadCheck(String),
    Elaborate(ElaborateError),
    Sim(SimError),
    Analysis(AnalysisError),
}

impl fmt::Display for ToleranceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToleranceError::ImpossibleRange { lo, hi } => {
                write!(f, "impossible sampling range [{lo}, {hi}]")
            }
            ToleranceError::ExcessiveRedraws => {
                write!(f, "gave up after {MAX_REDRAWS} invalid samples")
            }
            ToleranceError::BadCheck(msg) => write!(f, "malformed check: {msg}"),
            ToleranceError::Elaborate(e) => write!(f, "{e}"),
            ToleranceError::Sim(e) => write!(f, "{e}"),
            ToleranceError::Analysis(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ToleranceError {}

impl From<ElaborateError> for ToleranceError {
    fn from(e: ElaborateError) -> Self {
        ToleranceError::Elaborate(e)
    }
}

impl From<SimError> for ToleranceError {
    fn from(e: SimError) -> Self {
        ToleranceError::Sim(e)
    }
}

impl From<AnalysisError> for ToleranceError {
    fn from(e: AnalysisError) -> Self {
        ToleranceError::Analysis(e)
    }
}

/// One trial's worth of sampled specs plus the number of re-draws spent
/// restoring `snap_back < snap_through`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecSample {
    pub specs: Vec<ValveSpec>,
    pub redraws: u64,
}

/// Draws `n_valves` monostable specs for one trial. Deterministic given
/// (seed, trial_index): each trial uses its own ChaCha stream. Samples
/// violating `snap_back < snap_through` are re-drawn and counted.
pub fn sample_specs(
    model: &ToleranceModel,
    n_valves: usize,
    trial_index: u64,
) -> Result<SpecSample, ToleranceError> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    rng.set_stream(trial_index);
    let through = Uniform::new_inclusive(model.snap_through_range.0, model.snap_through_range.1);
    let back = Uniform::new_inclusive(model.snap_back_range.0, model.snap_back_range.1);

    let mut specs = Vec::with_capacity(n_valves);
    let mut redraws = 0u64;
    for i in 0..n_valves {
        loop {
            let st = through.sample(&mut rng);
            let sb = back.sample(&mut rng);
            if sb < st {
                specs.push(
                    ValveSpec::new(format!("v{i}"), Stability::Monostable, st, sb)
                        .expect("validated draw"),
                );
                break;
            }
            redraws += 1;
            if redraws > MAX_REDRAWS {
                return Err(ToleranceError::ExcessiveRedraws);
            }
        }
    }
    Ok(SpecSample { specs, redraws })
}

/// What each trial runs against the sampled circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginCheck {
    /// Enumerate the truth table and compare with the nominal circuit's
    /// table at its own rails.
    TruthTable,
    /// Run this stimulus and compare output logic with the nominal
    /// circuit at each stimulus segment end and at the final tick.
    Stimulus(Stimulus),
    /// Hold each sampled valve just past its snap-through point, disturb
    /// the control by this magnitude (kPa), and require state retention;
    /// a valve flips exactly when the disturbance reaches its sampled
    /// hysteresis width.
    Disturbance { magnitude_kpa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureCategory {
    /// A sampled snap-through exceeds the HIGH rail: the valve cannot be
    /// actuated at this operating pressure.
    NoSnap,
    /// A valve switched under a disturbance it should have tolerated.
    SpuriousSnap,
    /// Outputs diverged with every valve individually actuatable.
    LogicMismatch,
}

impl fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureCategory::NoSnap => write!(f, "no-snap"),
            FailureCategory::SpuriousSnap => write!(f, "spurious-snap"),
            FailureCategory::LogicMismatch => write!(f, "logic-mismatch"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub pass: bool,
    pub failure: Option<FailureCategory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FailureCounts {
    pub no_snap: u64,
    pub spurious_snap: u64,
    pub logic_mismatch: u64,
}

/// Aggregate Monte Carlo result. `pass_fraction` is exactly
/// `passes / trials`; the Wilson bounds give a 95% interval on it.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub trials: u64,
    pub passes: u64,
    pub pass_fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub failures: FailureCounts,
    pub redraws: u64,
    /// Worst actuation margin per valve: `p_high - snap_through`, minimum
    /// over all trials. Negative means the valve missed actuation in some
    /// trial.
    pub worst_margin_kpa: BTreeMap<String, f64>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Wilson 95% score interval for `passes` out of `trials`.
fn wilson_interval(passes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = passes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    (
        ((center - spread) / denom).max(0.0),
        ((center + spread) / denom).min(1.0),
    )
}

fn truth_rows(t: &TruthTable) -> Vec<Vec<LogicLevel>> {
    t.rows.iter().map(|r| r.outputs.clone()).collect()
}

/// Output logic of the declared output nets at the end of every stimulus
/// segment plus the final tick.
fn segment_end_outputs(graph: &CircuitGraph, wave: &Waveform, stimulus: &Stimulus) -> Vec<Vec<LogicLevel>> {
    let outputs = graph.outputs();
    let mut marks: Vec<u64> = stimulus
        .steps
        .iter()
        .skip(1)
        .map(|s| s.tick.saturating_sub(1))
        .collect();
    marks.push(wave.last().tick);
    marks
        .into_iter()
        .filter_map(|tick| {
            wave.records
                .iter()
                .find(|r| r.tick == tick)
                .map(|r| outputs.iter().map(|o| r.logic[o.index()]).collect())
        })
        .collect()
}

/// Runs `trials` independent Monte Carlo trials: per trial, substitute
/// sampled snap thresholds into every valve (keeping its stability and
/// label), rerail the circuit at `p_high`/0, run the check, and classify.
///
/// The expected behavior comes from the nominal circuit at its own rails.
pub fn margin_analysis(
    graph: &CircuitGraph,
    model: &ToleranceModel,
    p_high: PressureSignal,
    trials: u64,
    check: &MarginCheck,
) -> Result<MarginReport, ToleranceError> {
    model.validate()?;
    let nominal = match graph.level() {
        Level::Gate => elaborate(graph)?,
        Level::Valve => graph.clone(),
    };

    let mut test_rails = *nominal.rails();
    test_rails.p_high = p_high;
    test_rails.p_low = PressureSignal::ATMOSPHERE;
    test_rails
        .validate()
        .map_err(|e| ToleranceError::BadCheck(format!("rails at p_high={p_high}: {e}")))?;

    // Reference behavior of the nominal circuit at its own rails.
    let expected_truth = match check {
        MarginCheck::TruthTable => Some(truth_rows(&truth_table(&nominal, DEFAULT_SETTLE_BUDGET)?)),
        _ => None,
    };
    let expected_wave = match check {
        MarginCheck::Stimulus(stim) => {
            let wave = run(&nominal, stim, DEFAULT_MAX_TICKS)?;
            if matches!(wave.status, RunStatus::Conflict { .. }) {
                return Err(ToleranceError::BadCheck("nominal run conflicts".into()));
            }
            Some(segment_end_outputs(&nominal, &wave, stim))
        }
        _ => None,
    };
    if let MarginCheck::Disturbance { magnitude_kpa } = check {
        if !magnitude_kpa.is_finite() || *magnitude_kpa < 0.0 {
            return Err(ToleranceError::BadCheck("disturbance must be >= 0 kPa".into()));
        }
    }

    let n_valves = nominal.valves().len();
    let mut outcomes = Vec::with_capacity(trials as usize);
    let mut failures = FailureCounts::default();
    let mut passes = 0u64;
    let mut redraws = 0u64;
    let mut worst_margin: BTreeMap<String, f64> = BTreeMap::new();

    for trial in 0..trials {
        let sample = sample_specs(model, n_valves, trial)?;
        redraws += sample.redraws;

        let mut sampled = nominal.clone();
        sampled.set_rails(test_rails);
        for (valve, spec) in sampled.valves_mut().iter_mut().zip(&sample.specs) {
            valve.spec.snap_through_kpa = spec.snap_through_kpa;
            valve.spec.snap_back_kpa = spec.snap_back_kpa;
            let margin = p_high.kpa() - spec.snap_through_kpa;
            worst_margin
                .entry(valve.name.clone())
                .and_modify(|m| *m = m.min(margin))
                .or_insert(margin);
        }

        let outcome = run_trial(&sampled, check, expected_truth.as_ref(), expected_wave.as_ref(), p_high)?;
        if outcome.pass {
            passes += 1;
        } else {
            match outcome.failure {
                Some(FailureCategory::NoSnap) => failures.no_snap += 1,
                Some(FailureCategory::SpuriousSnap) => failures.spurious_snap += 1,
                Some(FailureCategory::LogicMismatch) | None => failures.logic_mismatch += 1,
            }
        }
        outcomes.push(outcome);
    }

    let (wilson_low, wilson_high) = wilson_interval(passes, trials);
    Ok(MarginReport {
        trials,
        passes,
        pass_fraction: if trials == 0 { 0.0 } else { passes as f64 / trials as f64 },
        wilson_low,
        wilson_high,
        failures,
        redraws,
        worst_margin_kpa: worst_margin,
        outcomes,
    })
}

fn classify_fail(sampled: &CircuitGraph, p_high: PressureSignal) -> FailureCategory {
    if sampled
        .valves()
        .iter()
        .any(|v| v.spec.snap_through_kpa > p_high.kpa())
    {
        FailureCategory::NoSnap
    } else {
        FailureCategory::LogicMismatch
    }
}

fn run_trial(
    sampled: &CircuitGraph,
    check: &MarginCheck,
    expected_truth: Option<&Vec<Vec<LogicLevel>>>,
    expected_wave: Option<&Vec<Vec<LogicLevel>>>,
    p_high: PressureSignal,
) -> Result<TrialOutcome, ToleranceError> {
    let fail = |category| TrialOutcome {
        pass: false,
        failure: Some(category),
    };
    let pass = TrialOutcome {
        pass: true,
        failure: None,
    };
    match check {
        MarginCheck::TruthTable => {
            let expected = expected_truth.expect("precomputed");
            match truth_table(sampled, DEFAULT_SETTLE_BUDGET) {
                Ok(t) => {
                    if &truth_rows(&t) == expected {
                        Ok(pass)
                    } else {
                        Ok(fail(classify_fail(sampled, p_high)))
                    }
                }
                // A sampled circuit that stops settling is a failure, not
                // an analysis error.
                Err(AnalysisError::NotCombinational(_))
                | Err(AnalysisError::BudgetExceeded { .. }) => {
                    Ok(fail(classify_fail(sampled, p_high)))
                }
                Err(e) => Err(e.into()),
            }
        }
        MarginCheck::Stimulus(stim) => {
            let expected = expected_wave.expect("precomputed");
            let wave = run(sampled, stim, DEFAULT_MAX_TICKS)?;
            if matches!(wave.status, RunStatus::Conflict { .. }) {
                return Ok(fail(classify_fail(sampled, p_high)));
            }
            if &segment_end_outputs(sampled, &wave, stim) == expected {
                Ok(pass)
            } else {
                Ok(fail(classify_fail(sampled, p_high)))
            }
        }
        MarginCheck::Disturbance { magnitude_kpa } => {
            for valve in sampled.valves() {
                // Hold the membrane just past snap-through, then back the
                // control off by the disturbance magnitude.
                let held = valve.spec.snap_through_kpa;
                let after = membrane_update(&valve.spec, MembraneState::Down, held - magnitude_kpa);
                if after != MembraneState::Down {
                    return Ok(fail(FailureCategory::SpuriousSnap));
                }
            }
            Ok(pass)
        }
    }
}
