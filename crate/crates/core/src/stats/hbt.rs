use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{Channel, PhotonStream};

/// Per-detector imperfections of a single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Non-paralyzable dead time after each registered click.
    pub dead_time_ps: u64,
    /// Gaussian timing jitter (standard deviation); zero disables it.
    pub jitter_sigma_ps: f64,
}

impl Default for DetectorModel {
    /// Typical superconducting nanowire detector: 50 ns dead time, 100 ps jitter.
    fn default() -> Self {
        Self {
            dead_time_ps: 50_000,
            jitter_sigma_ps: 100.0,
        }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            dead_time_ps: 0,
            jitter_sigma_ps: 0.0,
        }
    }
}

/// Drops every tag that arrives within `dead_time_ps` of the previous
/// registered tag.
pub fn apply_dead_time(s: &PhotonStream, dead_time_ps: u64) -> PhotonStream {
    if dead_time_ps == 0 {
        return s.clone();
    }
    let mut tags = Vec::with_capacity(s.len());
    let mut channels = Vec::with_capacity(s.len());
    let mut ready_at = 0u64;
    for (t, c) in s.iter() {
        if t >= ready_at {
            tags.push(t);
            channels.push(c);
            ready_at = t.saturating_add(dead_time_ps);
        }
    }
    PhotonStream::from_parts_unchecked(tags, channels, s.duration_ps(), s.seed())
}

/// Adds Gaussian timing noise, re-sorts, and resolves picosecond collisions
/// by nudging later tags forward. Tags pushed outside the stream are dropped.
pub fn apply_jitter(s: &PhotonStream, sigma_ps: f64, seed: u64) -> Result<PhotonStream> {
    if sigma_ps == 0.0 || s.is_empty() {
        return Ok(s.clone());
    }
    let normal = Normal::new(0.0, sigma_ps)
        .map_err(|e| Error::domain("jitter_sigma_ps", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = s.duration_ps() as f64;
    let mut shifted: Vec<(u64, Channel)> = s
        .iter()
        .filter_map(|(t, c)| {
            let x = (t as f64 + normal.sample(&mut rng)).round();
            (x >= 0.0 && x < duration).then_some((x as u64, c))
        })
        .collect();
    shifted.sort_by_key(|&(t, _)| t);
    let mut tags: Vec<u64> = Vec::with_capacity(shifted.len());
    let mut channels = Vec::with_capacity(shifted.len());
    for (t, c) in shifted {
        let t = match tags.last() {
            Some(&last) if t <= last => last + 1,
            _ => t,
        };
        if t >= s.duration_ps() {
            break;
        }
        tags.push(t);
        channels.push(c);
    }
    Ok(PhotonStream::from_parts_unchecked(tags, channels, s.duration_ps(), s.seed()))
}

/// 50:50 beam splitter followed by two detectors.
pub fn hbt_split(s: &PhotonStream, detector: &DetectorModel, seed: u64) -> Result<(PhotonStream, PhotonStream)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arms: [(Vec<u64>, Vec<Channel>); 2] = Default::default();
    for (t, c) in s.iter() {
        let arm = &mut arms[usize::from(rng.random::<bool>())];
        arm.0.push(t);
        arm.1.push(c);
    }
    let [(ta, ca), (tb, cb)] = arms;
    let a = PhotonStream::from_parts_unchecked(ta, ca, s.duration_ps(), s.seed());
    let b = PhotonStream::from_parts_unchecked(tb, cb, s.duration_ps(), s.seed());
    let jitter_seed = crate::emitter::derive_seed(seed, 1);
    let a = apply_jitter(&a, detector.jitter_sigma_ps, jitter_seed)?;
    let b = apply_jitter(&b, detector.jitter_sigma_ps, crate::emitter::derive_seed(jitter_seed, 2))?;
    Ok((
        apply_dead_time(&a, detector.dead_time_ps),
        apply_dead_time(&b, detector.dead_time_ps),
    ))
}
