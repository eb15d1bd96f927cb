//! Arrival-time (TCSPC) histograms relative to the excitation pulses.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stream::PhotonStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecayHistogram {
    pub bin_width_ps: u64,
    pub rep_period_ps: u64,
    /// Counts per bin over `[0, rep_period)`.
    pub counts: Vec<u64>,
}

impl DecayHistogram {
    /// Bin centres in picoseconds after the pulse.
    pub fn times_ps(&self) -> Vec<f64> {
        let w = self.bin_width_ps as f64;
        (0..self.counts.len()).map(|i| (i as f64 + 0.5) * w).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count-weighted mean arrival time in ps.
    pub fn mean_time_ps(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let weighted: f64 = self.times_ps().iter().zip(&self.counts).map(|(t, &c)| t * c as f64).sum();
        Some(weighted / total as f64)
    }
}

/// Folds every tag onto `tag mod rep_period` and bins it. The period must be
/// a whole number of bins so that the last bin is not truncated.
pub fn decay_histogram(s: &PhotonStream, rep_period_ps: u64, bin_width_ps: u64) -> Result<DecayHistogram> {
    if rep_period_ps == 0 || bin_width_ps == 0 {
        return Err(Error::Contract("repetition period and bin width must be positive".into()));
    }
    if !rep_period_ps.is_multiple_of(bin_width_ps) {
        return Err(Error::Contract(format!(
            "bin width {bin_width_ps} ps does not divide the period {rep_period_ps} ps"
        )));
    }
    let mut counts = vec![0u64; (rep_period_ps / bin_width_ps) as usize];
    for &t in s.tags() {
        counts[((t % rep_period_ps) / bin_width_ps) as usize] += 1;
    }
    Ok(DecayHistogram {
        bin_width_ps,
        rep_period_ps,
        counts,
    })
}
