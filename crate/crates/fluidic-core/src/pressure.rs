//! Pressure quantities, logic levels, and the digital abstraction thresholds
//! shared by all modules.
//!
//! All pressures are gauge pressures in kilopascals: 0 kPa is atmospheric,
//! vacuum is not modeled. The digital abstraction maps a pressure to HIGH
//! when it is at or above a configurable threshold, LOW otherwise;
//! UNDEFINED never comes out of the threshold function itself, only from
//! net conflicts or nets that were never driven (see [`crate::sim`]).

use core::fmt;

/// Highest gauge pressure accepted anywhere in the tooling (kPa). File
/// parsers reject larger literals.
pub const MAX_SYSTEM_KPA: f64 = 300.0;

/// A non-negative gauge pressure in kilopascals.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct PressureSignal(f64);

impl PressureSignal {
    /// Atmospheric pressure, 0 kPa gauge.
    pub const ATMOSPHERE: PressureSignal = PressureSignal(0.0);

    /// Wraps a kPa value, rejecting negative or non-finite input.
    pub fn new(kpa: f64) -> Result<Self, PressureError> {
        if !kpa.is_finite() {
            Err(PressureError::NotFinite)
        } else if kpa < 0.0 {
            Err(PressureError::Negative(kpa))
        } else {
            Ok(PressureSignal(kpa))
        }
    }

    pub fn kpa(self) -> f64 {
        self.0
    }
}

impl fmt::Display for PressureSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} kPa", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressureError {
    NotFinite,
    Negative(f64),
}

impl fmt::Display for PressureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PressureError::NotFinite => write!(f, "pressure must be finite"),
            PressureError::Negative(v) => {
                write!(f, "pressure must be non-negative, got {v} kPa")
            }
        }
    }
}

impl core::error::Error for PressureError {}

/// Digital interpretation of a net.
///
/// `Undefined` marks nets whose pressure cannot be read as a logic value:
/// conflicting sources or a sealed net that was never driven. Stimulus
/// files may not contain it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicLevel {
    Low,
    High,
    Undefined,
}

impl fmt::Display for LogicLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicLevel::Low => write!(f, "0"),
            LogicLevel::High => write!(f, "1"),
            LogicLevel::Undefined => write!(f, "U"),
        }
    }
}

/// Supply and rail pressures plus the digital threshold.
///
/// Defaults: 160 kPa supply, 150/0 kPa HIGH/LOW rails, 80 kPa threshold
/// (the midpoint of the supply range, maximizing noise margin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RailConfig {
    pub p_supply: PressureSignal,
    pub p_high: PressureSignal,
    pub p_low: PressureSignal,
    pub logic_threshold: PressureSignal,
}

impl Default for RailConfig {
    fn default() -> Self {
        RailConfig {
            p_supply: PressureSignal(160.0),
            p_high: PressureSignal(150.0),
            p_low: PressureSignal(0.0),
            logic_threshold: PressureSignal(80.0),
        }
    }
}

impl RailConfig {
    /// Checks `p_low < logic_threshold < p_high <= p_supply`.
    pub fn validate(&self) -> Result<(), RailError> {
        let (lo, th, hi, su) = (
            self.p_low.kpa(),
            self.logic_threshold.kpa(),
            self.p_high.kpa(),
            self.p_supply.kpa(),
        );
        if lo < th && th < hi && hi <= su {
            Ok(())
        } else {
            Err(RailError::Unordered)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RailError {
    /// Rails must satisfy `p_low < logic_threshold < p_high <= p_supply`.
    Unordered,
    /// UNDEFINED has no rail pressure.
    UndefinedLevel,
}

impl fmt::Display for RailError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RailError::Unordered => {
                write!(f, "rails must satisfy p_low < logic_threshold < p_high <= p_supply")
            }
            RailError::UndefinedLevel => {
                write!(f, "cannot synthesize a rail pressure for UNDEFINED")
            }
        }
    }
}

impl core::error::Error for RailError {}

/// Reads a pressure as a logic level: HIGH iff `p >= logic_threshold`.
///
/// The boundary maps to HIGH, a fixed tie-break.
pub fn kpa_to_logic(p: PressureSignal, cfg: &RailConfig) -> LogicLevel {
    if p.kpa() >= cfg.logic_threshold.kpa() {
        LogicLevel::High
    } else {
        LogicLevel::Low
    }
}

/// Converts a logic level to its rail pressure. UNDEFINED is an error.
pub fn logic_to_kpa(l: LogicLevel, cfg: &RailConfig) -> Result<PressureSignal, RailError> {
    match l {
        LogicLevel::High => Ok(cfg.p_high),
        LogicLevel::Low => Ok(cfg.p_low),
        LogicLevel::Undefined => Err(RailError::UndefinedLevel),
    }
}
