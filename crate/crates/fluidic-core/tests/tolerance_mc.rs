//! Monte Carlo tolerance analysis against closed-form oracles.
//!
//! For a single monostable valve driven at `p_high`, the pass probability
//! is the uniform CDF `P(snap_through <= p_high)`; the empirical fraction
//! must agree within three binomial standard errors at 10 000 trials.

use fluidic_core::netlist::{CircuitGraph, GateKind, Level};
use fluidic_core::pressure::PressureSignal;
use fluidic_core::tolerance::{
    margin_analysis, sample_specs, MarginCheck, ToleranceModel, DEFAULT_SNAP_THROUGH_RANGE,
};

fn not_gate() -> CircuitGraph {
    let mut g = CircuitGraph::new(Level::Gate);
    let a = g.intern_net("A").unwrap();
    let q = g.intern_net("Q").unwrap();
    g.add_input(a);
    g.add_output(q);
    g.add_gate("n1", GateKind::Not, vec![a], q, None).unwrap();
    g
}

fn p(kpa: f64) -> PressureSignal {
    PressureSignal::new(kpa).unwrap()
}

#[test]
fn empirical_pass_fraction_matches_uniform_cdf() {
    let g = not_gate();
    let model = ToleranceModel::with_seed(42);
    let trials = 10_000u64;
    let p_high = 134.0;

    let (lo, hi) = DEFAULT_SNAP_THROUGH_RANGE;
    let analytic = (p_high - lo) / (hi - lo); // 31/50 = 0.62
    assert!((analytic - 0.62).abs() < 1e-12);

    let report = margin_analysis(&g, &model, p(p_high), trials, &MarginCheck::TruthTable).unwrap();
    let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
    assert!(
        (report.pass_fraction - analytic).abs() <= 3.0 * sigma,
        "pass_fraction {} vs analytic {analytic} (3 sigma = {})",
        report.pass_fraction,
        3.0 * sigma
    );
    // All failures at this pressure are missed actuations.
    assert_eq!(report.failures.logic_mismatch, 0);
    assert_eq!(report.failures.spurious_snap, 0);
    assert_eq!(
        report.failures.no_snap,
        trials - report.passes,
    );
    // Wilson interval brackets the estimate.
    assert!(report.wilson_low <= report.pass_fraction);
    assert!(report.pass_fraction <= report.wilson_high);
    assert!(report.wilson_high - report.wilson_low < 0.03);
}

#[test]
fn pass_fraction_is_monotone_in_operating_pressure() {
    let g = not_gate();
    let model = ToleranceModel::with_seed(7);
    let mut previous = -1.0;
    for p_high in [100.0, 110.0, 120.0, 130.0, 140.0, 150.0, 160.0] {
        let report =
            margin_analysis(&g, &model, p(p_high), 800, &MarginCheck::TruthTable).unwrap();
        assert!(
            report.pass_fraction >= previous,
            "pass fraction dropped at {p_high} kPa: {} < {previous}",
            report.pass_fraction
        );
        previous = report.pass_fraction;
    }
}

#[test]
fn sampled_specs_always_satisfy_the_valve_invariant() {
    // Overlapping ranges force re-draws; every kept sample must satisfy
    // snap_back < snap_through.
    let model = ToleranceModel {
        snap_through_range: (60.0, 100.0),
        snap_back_range: (40.0, 73.0),
        ..ToleranceModel::with_seed(3)
    };
    let mut redraws = 0;
    for trial in 0..2_500u64 {
        let s = sample_specs(&model, 4, trial).unwrap();
        redraws += s.redraws;
        for spec in &s.specs {
            assert!(spec.snap_back_kpa < spec.snap_through_kpa);
            assert!((model.snap_through_range.0..=model.snap_through_range.1)
                .contains(&spec.snap_through_kpa));
            assert!((model.snap_back_range.0..=model.snap_back_range.1)
                .contains(&spec.snap_back_kpa));
        }
    }
    assert!(redraws > 0, "overlapping ranges should have forced re-draws");
}

#[test]
fn worst_case_margin_is_reported_per_valve() {
    let g = not_gate();
    let model = ToleranceModel::with_seed(5);
    let report =
        margin_analysis(&g, &model, p(153.0), 2_000, &MarginCheck::TruthTable).unwrap();
    let worst = report.worst_margin_kpa.get("n1").copied().unwrap();
    // snap_through <= 153 for the whole default range: margin stays >= 0
    // and cannot exceed the 50 kPa span.
    assert!((0.0..=50.0).contains(&worst), "worst margin {worst}");
    assert_eq!(report.pass_fraction, 1.0);
}
