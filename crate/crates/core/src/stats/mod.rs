//! Measurement side: beam-splitter/detector model, coincidence correlation,
//! lifetime histograms, and CSV export.

mod correlate;
mod decay;
mod hbt;

pub use correlate::{background_corrected_g2, g2_histogram, pulsed_g2, G2Histogram, PulsedG2Summary};
pub use decay::{decay_histogram, DecayHistogram};
pub use hbt::{apply_dead_time, apply_jitter, hbt_split, DetectorModel};

use std::io::Write;

use crate::error::Result;

/// Writes `delay_ps,counts,g2` rows.
pub fn write_g2_csv<W: Write>(h: &G2Histogram, mut w: W) -> Result<()> {
    writeln!(w, "delay_ps,counts,g2")?;
    for ((d, c), g) in h.delays_ps().iter().zip(&h.counts).zip(h.g2()) {
        writeln!(w, "{d},{c},{g:.16e}")?;
    }
    Ok(())
}

/// Writes `t_ps,counts` rows with bin-centre times.
pub fn write_decay_csv<W: Write>(h: &DecayHistogram, mut w: W) -> Result<()> {
    writeln!(w, "t_ps,counts")?;
    for (t, c) in h.times_ps().iter().zip(&h.counts) {
        writeln!(w, "{t:.16e},{c}")?;
    }
    Ok(())
}
