//! The hysteretic two-state membrane valve.
//!
//! A valve body holds a snapping hemispherical membrane between two
//! chambers. The membrane position decides which of the two tubes running
//! through the body is kinked shut: in the resting `Up` position the top
//! tube is kinked and the bottom tube is open, and vice versa, always
//! exactly complementary. The membrane flips under the chamber pressure
//! differential with hysteresis: it snaps through (Up to Down) when the
//! differential reaches one threshold and snaps back below a lower one,
//! nominally 134 kPa and 56 kPa with a 78 kPa hysteresis width.
//!
//! A monostable valve relaxes back to `Up` once the differential falls to
//! the snap-back level, so it needs sustained control pressure; a bistable
//! valve keeps its position until driven with a reverse differential, which
//! makes it a one-bit memory element.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Nominal snap-through threshold of a printed valve (kPa).
pub const NOMINAL_SNAP_THROUGH_KPA: f64 = 134.0;
/// Nominal snap-back threshold of a printed valve (kPa).
pub const NOMINAL_SNAP_BACK_KPA: f64 = 56.0;

/// Whether the valve holds one stable position or two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    /// Single stable state; relaxes to `Up` when the differential drops to
    /// the snap-back level. Used for logic gates.
    Monostable,
    /// Two stable states; needs a reverse differential at or below minus
    /// the snap-back level to return `Up`. Used for memory elements.
    Bistable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stability::Monostable => write!(f, "monostable"),
            Stability::Bistable => write!(f, "bistable"),
        }
    }
}

/// Snap thresholds and stability mode of one valve design.
#[derive(Debug, Clone, PartialEq)]
pub struct ValveSpec {
    /// Differential that flips the membrane Up -> Down (kPa).
    pub snap_through_kpa: f64,
    /// Differential level that lets the membrane return Down -> Up (kPa).
    pub snap_back_kpa: f64,
    pub stability: Stability,
    pub label: String,
}

impl ValveSpec {
    /// A spec with explicit thresholds. Requires `0 < snap_back < snap_through`.
    pub fn new(
        label: impl Into<String>,
        stability: Stability,
        snap_through_kpa: f64,
        snap_back_kpa: f64,
    ) -> Result<Self, ValveSpecError> {
        if !snap_through_kpa.is_finite() || !snap_back_kpa.is_finite() {
            return Err(ValveSpecError::NotFinite);
        }
        if !(0.0 < snap_back_kpa && snap_back_kpa < snap_through_kpa) {
            return Err(ValveSpecError::InvalidWindow {
                snap_through_kpa,
                snap_back_kpa,
            });
        }
        Ok(ValveSpec {
            snap_through_kpa,
            snap_back_kpa,
            stability,
            label: label.into(),
        })
    }

    /// A monostable valve with the nominal 134/56 kPa thresholds.
    pub fn monostable(label: impl Into<String>) -> Self {
        ValveSpec::new(label, Stability::Monostable, NOMINAL_SNAP_THROUGH_KPA, NOMINAL_SNAP_BACK_KPA)
            .expect("nominal thresholds are valid")
    }

    /// A bistable valve with the nominal 134/56 kPa thresholds.
    pub fn bistable(label: impl Into<String>) -> Self {
        ValveSpec::new(label, Stability::Bistable, NOMINAL_SNAP_THROUGH_KPA, NOMINAL_SNAP_BACK_KPA)
            .expect("nominal thresholds are valid")
    }

    /// Hysteresis width: snap-through minus snap-back, nominally 78 kPa.
    /// A settled valve tolerates any control disturbance smaller than this
    /// without switching.
    pub fn hysteresis_width_kpa(&self) -> f64 {
        self.snap_through_kpa - self.snap_back_kpa
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValveSpecError {
    NotFinite,
    /// The hysteresis window must be positive: `0 < snap_back < snap_through`.
    InvalidWindow { snap_through_kpa: f64, snap_back_kpa: f64 },
}

impl fmt::Display for ValveSpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValveSpecError::NotFinite => write!(f, "snap thresholds must be finite"),
            ValveSpecError::InvalidWindow {
                snap_through_kpa,
                snap_back_kpa,
            } => write!(
                f,
                "need 0 < snap_back < snap_through, got snap_through={snap_through_kpa} snap_back={snap_back_kpa}"
            ),
        }
    }
}

impl core::error::Error for ValveSpecError {}

/// Membrane position. `Up` is the resting state of a monostable valve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MembraneState {
    Up,
    Down,
}

/// Open or kinked (pinched shut, blocking airflow).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TubeState {
    Open,
    Kinked,
}

/// Kink state of both tubes. Complementary by construction: the two fields
/// always differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TubeStates {
    pub top: TubeState,
    pub bottom: TubeState,
}

/// Advances the membrane one step under the differential
/// `delta_p = P(top chamber) - P(bottom chamber)` in kPa.
///
/// Monostable: Up -> Down at `delta_p >= snap_through`, Down -> Up at
/// `delta_p <= snap_back`. Bistable: same snap-through, but returning Up
/// requires a reverse differential `delta_p <= -snap_back`. Comparisons are
/// inclusive, so a control pressure exactly at the threshold actuates.
/// Total function; a non-finite differential leaves the state unchanged.
pub fn membrane_update(spec: &ValveSpec, state: MembraneState, delta_p_kpa: f64) -> MembraneState {
    if !delta_p_kpa.is_finite() {
        return state;
    }
    match (state, spec.stability) {
        (MembraneState::Up, _) if delta_p_kpa >= spec.snap_through_kpa => MembraneState::Down,
        (MembraneState::Down, Stability::Monostable) if delta_p_kpa <= spec.snap_back_kpa => {
            MembraneState::Up
        }
        (MembraneState::Down, Stability::Bistable) if delta_p_kpa <= -spec.snap_back_kpa => {
            MembraneState::Up
        }
        _ => state,
    }
}

/// The tube kinks implied by a membrane position: `Up` kinks the top tube
/// and leaves the bottom open, `Down` the reverse.
pub fn tube_states(state: MembraneState) -> TubeStates {
    match state {
        MembraneState::Up => TubeStates {
            top: TubeState::Kinked,
            bottom: TubeState::Open,
        },
        MembraneState::Down => TubeStates {
            top: TubeState::Open,
            bottom: TubeState::Kinked,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepError {
    NonFiniteRamp,
    NonFiniteSupply,
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepError::NonFiniteRamp => write!(f, "ramp contains a non-finite control value"),
            SweepError::NonFiniteSupply => write!(f, "supply pressure must be finite"),
        }
    }
}

impl core::error::Error for SweepError {}

/// Quasi-static control/output sweep of a single valve: supply on the
/// bottom tube, atmosphere on the top tube, membrane starting `Up`.
///
/// For each ramp point the membrane is updated first, then the output is
/// read: `p_supply` while the bottom tube is open, 0 while it is kinked.
/// Returns `(control_kpa, output_kpa)` pairs, one per ramp point.
pub fn sweep_hysteresis(
    spec: &ValveSpec,
    p_supply_kpa: f64,
    ramp: &[f64],
) -> Result<Vec<(f64, f64)>, SweepError> {
    if !p_supply_kpa.is_finite() {
        return Err(SweepError::NonFiniteSupply);
    }
    if ramp.iter().any(|c| !c.is_finite()) {
        return Err(SweepError::NonFiniteRamp);
    }
    let mut state = MembraneState::Up;
    let mut out = Vec::with_capacity(ramp.len());
    for &control in ramp {
        state = membrane_update(spec, state, control);
        let output = match tube_states(state).bottom {
            TubeState::Open => p_supply_kpa,
            TubeState::Kinked => 0.0,
        };
        out.push((control, output));
    }
    Ok(out)
}

/// A triangular control ramp `0 -> peak -> 0` in fixed steps, the standard
/// input for [`sweep_hysteresis`]. The peak appears once.
pub fn triangle_ramp(peak_kpa: f64, step_kpa: f64) -> Vec<f64> {
    let mut ramp = Vec::new();
    if !(peak_kpa.is_finite() && step_kpa.is_finite()) || step_kpa <= 0.0 || peak_kpa < 0.0 {
        return ramp;
    }
    let mut c = 0.0;
    while c < peak_kpa {
        ramp.push(c);
        c += step_kpa;
    }
    ramp.push(peak_kpa);
    let mut c = peak_kpa - step_kpa;
    while c > 0.0 {
        ramp.push(c);
        c -= step_kpa;
    }
    ramp.push(0.0);
    ramp
}

/// Geometry symbols of the printed valve design, housed for documentation
/// only; this type has no simulated behavior. Larger values of every
/// parameter except the inner diameter call for higher control pressures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValveDesignParams {
    /// Membrane top thickness (mm).
    pub t_top_mm: f64,
    /// Membrane base thickness (mm).
    pub t_base_mm: f64,
    /// Membrane angle (degrees).
    pub theta_deg: f64,
    /// Rim thickness (mm).
    pub r_t_mm: f64,
    /// Rim width (mm).
    pub r_w_mm: f64,
    /// Inner diameter of the valve (mm); the one parameter whose growth
    /// does not raise the required control pressure.
    pub v_id_mm: f64,
}

impl ValveDesignParams {
    /// All dimensions must be positive and finite.
    pub fn new(
        t_top_mm: f64,
        t_base_mm: f64,
        theta_deg: f64,
        r_t_mm: f64,
        r_w_mm: f64,
        v_id_mm: f64,
    ) -> Result<Self, ValveSpecError> {
        let all = [t_top_mm, t_base_mm, theta_deg, r_t_mm, r_w_mm, v_id_mm];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ValveSpecError::NotFinite);
        }
        if all.iter().any(|&v| v <= 0.0) {
            return Err(ValveSpecError::InvalidWindow {
                snap_through_kpa: 0.0,
                snap_back_kpa: 0.0,
            });
        }
        Ok(ValveDesignParams {
            t_top_mm,
            t_base_mm,
            theta_deg,
            r_t_mm,
            r_w_mm,
            v_id_mm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use MembraneState::{Down, Up};

    #[test]
    fn monostable_snaps_through_at_150() {
        let spec = ValveSpec::monostable("v");
        assert_eq!(membrane_update(&spec, Up, 150.0), Down);
    }

    #[test]
    fn monostable_relaxes_at_zero() {
        let spec = ValveSpec::monostable("v");
        assert_eq!(membrane_update(&spec, Down, 0.0), Up);
    }

    #[test]
    fn monostable_holds_inside_band() {
        let spec = ValveSpec::monostable("v");
        assert_eq!(membrane_update(&spec, Down, 70.0), Down);
        assert_eq!(membrane_update(&spec, Up, 70.0), Up);
    }

    #[test]
    fn bistable_holds_at_zero() {
        let spec = ValveSpec::bistable("v");
        assert_eq!(membrane_update(&spec, Down, 0.0), Down);
        assert_eq!(membrane_update(&spec, Up, 0.0), Up);
    }

    #[test]
    fn bistable_resets_on_reverse_differential() {
        // -60 <= -56, so the reverse differential releases the membrane.
        let spec = ValveSpec::bistable("v");
        assert_eq!(membrane_update(&spec, Down, -60.0), Up);
        assert_eq!(membrane_update(&spec, Down, -50.0), Down);
    }

    #[test]
    fn thresholds_are_inclusive() {
        let spec = ValveSpec::monostable("v");
        assert_eq!(membrane_update(&spec, Up, 134.0), Down);
        assert_eq!(membrane_update(&spec, Down, 56.0), Up);
    }

    #[test]
    fn tubes_are_complementary() {
        let up = tube_states(Up);
        assert_eq!(up.top, TubeState::Kinked);
        assert_eq!(up.bottom, TubeState::Open);
        let down = tube_states(Down);
        assert_eq!(down.top, TubeState::Open);
        assert_eq!(down.bottom, TubeState::Kinked);
        assert_ne!(up.top, up.bottom);
        assert_ne!(down.top, down.bottom);
    }

    #[test]
    fn sweep_switches_at_thresholds_with_10kpa_steps() {
        let spec = ValveSpec::monostable("v");
        let ramp = triangle_ramp(160.0, 10.0);
        let pts = sweep_hysteresis(&spec, 160.0, &ramp).unwrap();
        // Rising leg: output drops at the first control >= 134, i.e. 140.
        let drop = pts.iter().find(|(_, out)| *out == 0.0).unwrap();
        assert_eq!(drop.0, 140.0);
        // Falling leg: output returns at the first control <= 56, i.e. 50.
        let recover = pts
            .iter()
            .skip_while(|(_, out)| *out != 0.0)
            .find(|(_, out)| *out == 160.0)
            .unwrap();
        assert_eq!(recover.0, 50.0);
    }

    #[test]
    fn sweep_flat_ramp_passes_supply() {
        let spec = ValveSpec::monostable("v");
        let pts = sweep_hysteresis(&spec, 160.0, &[0.0, 0.0, 0.0]).unwrap();
        assert!(pts.iter().all(|(_, out)| *out == 160.0));
    }

    #[test]
    fn sweep_rejects_non_finite() {
        let spec = ValveSpec::monostable("v");
        assert_eq!(
            sweep_hysteresis(&spec, 160.0, &[0.0, f64::NAN]),
            Err(SweepError::NonFiniteRamp)
        );
    }

    #[test]
    fn spec_rejects_inverted_window() {
        assert!(ValveSpec::new("v", Stability::Monostable, 56.0, 134.0).is_err());
        assert!(ValveSpec::new("v", Stability::Monostable, 134.0, 0.0).is_err());
        assert!(ValveSpec::new("v", Stability::Monostable, 134.0, 134.0).is_err());
    }

    #[test]
    fn hysteresis_width_default() {
        assert_eq!(ValveSpec::monostable("v").hysteresis_width_kpa(), 78.0);
    }
}
