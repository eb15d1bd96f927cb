//! Start–stop coincidence counting between two detector streams.
//!
//! Bin `k` collects delays `d = t_b − t_a` with `(k − ½)Δ ≤ d < (k + ½)Δ`, so bin
//! centres sit at `k·Δ`. A sliding window over `b` keeps the cost at
//! `O(N·w)` with `w` the number of `b` tags inside the correlation window.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stream::PhotonStream;

/// Chunk size for parallel correlation over the `a` stream.
const CHUNK: usize = 1 << 15;

/// Binned coincidence counts with the bookkeeping needed to normalize them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct G2Histogram {
    pub bin_width_ps: u64,
    /// Number of bins on each side of zero.
    pub half_bins: usize,
    /// `2·half_bins + 1` coincidence counts, most negative delay first.
    pub counts: Vec<u64>,
    pub n_a: u64,
    pub n_b: u64,
    pub duration_ps: u64,
}

impl G2Histogram {
    fn empty(bin_width_ps: u64, half_bins: usize, a: &PhotonStream, b: &PhotonStream) -> Self {
        Self {
            bin_width_ps,
            half_bins,
            counts: vec![0; 2 * half_bins + 1],
            n_a: a.len() as u64,
            n_b: b.len() as u64,
            duration_ps: a.duration_ps().max(b.duration_ps()),
        }
    }

    /// Bin centres in picoseconds.
    pub fn delays_ps(&self) -> Vec<i64> {
        let k = self.half_bins as i64;
        (-k..=k).map(|i| i * self.bin_width_ps as i64).collect()
    }

    /// Expected accidental coincidences per bin, `r_a·r_b·T·Δ`.
    pub fn normalization(&self) -> f64 {
        if self.duration_ps == 0 {
            return 0.0;
        }
        let t = self.duration_ps as f64;
        (self.n_a as f64 / t) * (self.n_b as f64 / t) * t * self.bin_width_ps as f64
    }

    pub fn g2(&self) -> Vec<f64> {
        let norm = self.normalization();
        self.counts
            .iter()
            .map(|&c| if norm > 0.0 { c as f64 / norm } else { 0.0 })
            .collect()
    }

    /// Poisson standard error on each normalized bin.
    pub fn g2_sigma(&self) -> Vec<f64> {
        let norm = self.normalization();
        self.counts
            .iter()
            .map(|&c| if norm > 0.0 { (c.max(1) as f64).sqrt() / norm } else { f64::INFINITY })
            .collect()
    }

    pub fn center_count(&self) -> u64 {
        self.counts[self.half_bins]
    }

    /// `(g²(0), σ)` from the central bin.
    pub fn g2_zero(&self) -> (f64, f64) {
        let i = self.half_bins;
        (self.g2()[i], self.g2_sigma()[i])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Combines histograms from disjoint acquisitions with identical binning.
    pub fn merge(&mut self, other: &G2Histogram) -> Result<()> {
        if other.bin_width_ps != self.bin_width_ps || other.half_bins != self.half_bins {
            return Err(Error::Contract("cannot merge histograms with different binning".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_a += other.n_a;
        self.n_b += other.n_b;
        self.duration_ps += other.duration_ps;
        Ok(())
    }

    /// Histogram with the two detectors swapped (delays mirrored).
    pub fn mirrored(&self) -> G2Histogram {
        let mut h = self.clone();
        h.counts.reverse();
        std::mem::swap(&mut h.n_a, &mut h.n_b);
        h
    }
}

fn check_sorted(name: &str, s: &PhotonStream) -> Result<()> {
    if s.tags().windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(Error::Contract(format!("stream {name} is not sorted")))
    }
}

/// Index of the bin holding delay `d` (floor of `(2d + Δ) / 2Δ`).
#[inline]
pub(crate) fn bin_index(d: i64, width: i64) -> i64 {
    (2 * d + width).div_euclid(2 * width)
}

/// Counts coincidences for `a[range]` against all of `b`.
fn correlate_slice(a: &[u64], b: &[u64], width: u64, half_bins: usize, counts: &mut [u64]) {
    let width_i = width as i64;
    let k = half_bins as i64;
    // Delays d with −(K+½)Δ ≤ d < (K+½)Δ; the reach is rounded outward and
    // the exact bound enforced by the index check.
    let reach = (k * width_i + width_i / 2 + 1) as u64;
    let Some(&first) = a.first() else { return };
    let mut start = b.partition_point(|&t| t + reach < first);
    for &ta in a {
        while start < b.len() && b[start] + reach < ta {
            start += 1;
        }
        for &tb in &b[start..] {
            if tb > ta + reach {
                break;
            }
            let idx = bin_index(tb as i64 - ta as i64, width_i);
            if (-k..=k).contains(&idx) {
                counts[(idx + k) as usize] += 1;
            }
        }
    }
}

/// Cross-correlation histogram of two sorted streams. Bins span delays up to
/// `max_delay_ps` on both sides (`⌊max_delay / bin_width⌋` bins per side).
pub fn g2_histogram(a: &PhotonStream, b: &PhotonStream, bin_width_ps: u64, max_delay_ps: u64) -> Result<G2Histogram> {
    if bin_width_ps == 0 {
        return Err(Error::Contract("bin width must be positive".into()));
    }
    check_sorted("a", a)?;
    check_sorted("b", b)?;
    let half_bins = usize::try_from(max_delay_ps / bin_width_ps)
        .map_err(|_| Error::Contract("too many bins".into()))?;
    let mut hist = G2Histogram::empty(bin_width_ps, half_bins, a, b);
    let bt = b.tags();
    hist.counts = a
        .tags()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut counts = vec![0u64; 2 * half_bins + 1];
            correlate_slice(chunk, bt, bin_width_ps, half_bins, &mut counts);
            counts
        })
        .reduce(
            || vec![0u64; 2 * half_bins + 1],
            |mut x, y| {
                for (p, q) in x.iter_mut().zip(y) {
                    *p += q;
                }
                x
            },
        );
    Ok(hist)
}

/// Coincidence areas of a pulsed correlation, one window of width `T` per peak.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulsedG2Summary {
    pub rep_period_ns: f64,
    /// Peak areas for `k = −K..=K`.
    pub peak_areas: Vec<u64>,
    /// `area(0) / mean(area(k ≠ 0))`.
    pub g2_zero: f64,
    pub uncertainty: f64,
}

impl PulsedG2Summary {
    pub fn peak_indices(&self) -> impl Iterator<Item = i64> {
        let k = (self.peak_areas.len() / 2) as i64;
        -k..=k
    }

    pub fn mean_side_area(&self) -> f64 {
        let k = self.peak_areas.len() / 2;
        let side: u64 = self.peak_areas.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &a)| a).sum();
        side as f64 / (2 * k) as f64
    }
}

/// Integrates coincidences in windows `[(k−½)T, (k+½)T)` for `|k| ≤ n_peaks`.
pub fn pulsed_g2(a: &PhotonStream, b: &PhotonStream, rep_period_ns: f64, n_peaks: usize) -> Result<PulsedG2Summary> {
    if !(rep_period_ns > 0.0) {
        return Err(Error::Contract(format!("repetition period must be positive, got {rep_period_ns}")));
    }
    if n_peaks < 1 {
        return Err(Error::Contract("at least two side peaks (n_peaks >= 1) are required".into()));
    }
    let period_ps = (rep_period_ns * 1e3).round() as u64;
    let hist = g2_histogram(a, b, period_ps, period_ps * n_peaks as u64)?;
    let areas = hist.counts;
    let center = areas[n_peaks] as f64;
    let side_total: u64 = areas.iter().enumerate().filter(|&(i, _)| i != n_peaks).map(|(_, &c)| c).sum();
    let mean_side = side_total as f64 / (2 * n_peaks) as f64;
    let (g2_zero, uncertainty) = if side_total == 0 {
        (f64::NAN, f64::INFINITY)
    } else {
        let g = center / mean_side;
        // Poisson errors on the zero peak and on the pooled side peaks.
        let rel = (1.0 / center.max(1.0) + 1.0 / side_total as f64).sqrt();
        let sigma = if center > 0.0 { g * rel } else { 1.0 / mean_side };
        (g, sigma)
    };
    Ok(PulsedG2Summary {
        rep_period_ns,
        peak_areas: areas,
        g2_zero,
        uncertainty,
    })
}

/// Removes uncorrelated background: `(g2_raw − (1 − ρ²)) / ρ²`.
pub fn background_corrected_g2(g2_raw: f64, signal_fraction: f64) -> Result<f64> {
    if !(signal_fraction > 0.0 && signal_fraction <= 1.0) {
        return Err(Error::domain(
            "signal_fraction",
            format!("must lie in (0, 1], got {signal_fraction}"),
        ));
    }
    let r2 = signal_fraction * signal_fraction;
    Ok((g2_raw - (1.0 - r2)) / r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::Channel;

    fn stream(tags: Vec<u64>, duration: u64) -> PhotonStream {
        let n = tags.len();
        PhotonStream::new(tags, vec![Channel::Zpl; n], duration, 0).unwrap()
    }

    #[test]
    fn single_pair_lands_in_its_bin() {
        let a = stream(vec![0], 10_000);
        let b = stream(vec![1_000], 10_000);
        let h = g2_histogram(&a, &b, 100, 2_000).unwrap();
        let delays = h.delays_ps();
        assert_eq!(h.total(), 1);
        let idx = h.counts.iter().position(|&c| c == 1).unwrap();
        assert_eq!(delays[idx], 1_000);
        assert_eq!(delays.len(), 41);
        assert_eq!(delays[20], 0);
    }

    #[test]
    fn bin_edges_are_half_open() {
        assert_eq!(bin_index(-50, 100), 0);
        assert_eq!(bin_index(49, 100), 0);
        assert_eq!(bin_index(50, 100), 1);
        assert_eq!(bin_index(-51, 100), -1);
        assert_eq!(bin_index(-2, 3), -1);
        assert_eq!(bin_index(-1, 3), 0);
        assert_eq!(bin_index(1, 3), 0);
        assert_eq!(bin_index(2, 3), 1);
    }

    #[test]
    fn zero_bin_width_is_contract_violation() {
        let a = stream(vec![0], 10);
        assert!(matches!(g2_histogram(&a, &a, 0, 10), Err(Error::Contract(_))));
    }

    #[test]
    fn pulsed_requires_two_side_peaks() {
        let a = stream(vec![0], 10);
        assert!(matches!(pulsed_g2(&a, &a, 100.0, 0), Err(Error::Contract(_))));
        assert!(matches!(pulsed_g2(&a, &a, 0.0, 2), Err(Error::Contract(_))));
    }

    #[test]
    fn merge_and_mirror() {
        let a = stream(vec![0, 500, 900], 2_000);
        let b = stream(vec![100, 700], 2_000);
        let mut h = g2_histogram(&a, &b, 100, 1_000).unwrap();
        let swapped = g2_histogram(&b, &a, 100, 1_000).unwrap();
        assert_eq!(h.mirrored().counts, swapped.counts);
        let copy = h.clone();
        h.merge(&copy).unwrap();
        assert_eq!(h.total(), 2 * copy.total());
        assert_eq!(h.duration_ps, 4_000);
        assert!((h.normalization() - 2.0 * copy.normalization()).abs() < 1e-12);
        let other = g2_histogram(&a, &b, 50, 1_000).unwrap();
        assert!(h.merge(&other).is_err());
    }

    #[test]
    fn correction_examples() {
        assert_eq!(background_corrected_g2(0.30, 1.0).unwrap(), 0.30);
        for rho in [0.2, 0.5, 0.837, 1.0] {
            assert!(background_corrected_g2(1.0 - rho * rho, rho).unwrap().abs() < 1e-14);
        }
        let c = background_corrected_g2(0.30, 0.837).unwrap();
        // 1 − 0.837² = 0.29943
        assert!(c.abs() < 2e-3, "{c}");
        assert!(background_corrected_g2(0.3, 0.0).is_err());
    }
}
