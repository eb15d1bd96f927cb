use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cavity resonance under repeated argon-injection cycles.
///
/// The resonance approaches `saturation_nm` exponentially. The per-cycle
/// decay constant is `shift_per_cycle / (saturation − initial)`, so the very
/// first cycles move the resonance by about `shift_per_cycle_nm` each while
/// the saturation point is still far away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningState {
    pub cycles_applied: u32,
    pub initial_nm: f64,
    pub current_nm: f64,
    pub shift_per_cycle_nm: f64,
    pub saturation_nm: f64,
}

impl Default for TuningState {
    fn default() -> Self {
        Self::start(1269.0, 0.5, 1275.0)
    }
}

impl TuningState {
    pub fn start(initial_nm: f64, shift_per_cycle_nm: f64, saturation_nm: f64) -> Self {
        Self {
            cycles_applied: 0,
            initial_nm,
            current_nm: initial_nm,
            shift_per_cycle_nm,
            saturation_nm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shift_per_cycle_nm.is_finite() && self.shift_per_cycle_nm >= 0.0) {
            return Err(Error::domain("shift_per_cycle_nm", "must be finite and >= 0"));
        }
        if !(self.saturation_nm > self.initial_nm) {
            return Err(Error::domain("saturation_nm", "must lie above the initial resonance"));
        }
        if !(self.current_nm >= self.initial_nm && self.current_nm <= self.saturation_nm) {
            return Err(Error::domain("current_nm", "must lie between initial_nm and saturation_nm"));
        }
        Ok(())
    }

    /// Decay constant per cycle.
    pub fn rate_per_cycle(&self) -> f64 {
        self.shift_per_cycle_nm / (self.saturation_nm - self.initial_nm)
    }

    /// Resonance after `cycles` (possibly fractional) cycles from the initial state.
    pub fn resonance_after(&self, cycles: f64) -> f64 {
        let span = self.saturation_nm - self.initial_nm;
        self.saturation_nm - span * (-cycles * self.rate_per_cycle()).exp()
    }

    /// Fractional cycle count at which the resonance reaches `target_nm`,
    /// or `None` if it is never reached.
    pub fn cycles_to_reach(&self, target_nm: f64) -> Option<f64> {
        if target_nm < self.initial_nm || target_nm >= self.saturation_nm || self.rate_per_cycle() <= 0.0 {
            return None;
        }
        let frac = (self.saturation_nm - target_nm) / (self.saturation_nm - self.initial_nm);
        Some(-frac.ln() / self.rate_per_cycle())
    }
}

pub fn apply_tuning_cycle(t: &TuningState, n_cycles: u32) -> TuningState {
    let remaining = t.saturation_nm - t.current_nm;
    let next = t.saturation_nm - remaining * (-(n_cycles as f64) * t.rate_per_cycle()).exp();
    TuningState {
        cycles_applied: t.cycles_applied + n_cycles,
        // Rounding must never push the resonance backwards or past saturation.
        current_nm: next.clamp(t.current_nm, t.saturation_nm),
        ..*t
    }
}
