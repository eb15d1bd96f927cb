//! Gillespie (direct-method) sampling of the three-level emitter.
//!
//! Every step consumes exactly three uniforms (waiting time, transition,
//! photon label) whatever the state, so runs that share a seed but differ in
//! rates stay aligned in their random-number consumption.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{EmitterParams, Kinetics};
use crate::error::{Error, Result};
use crate::stream::{Channel, PhotonStream};

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Ground,
    Excited,
    Triplet,
}

enum Outcome {
    Photon(Channel),
    Silent,
}

struct Sampler {
    rng: ChaCha8Rng,
    k: Kinetics,
    level: Level,
}

impl Sampler {
    fn new(k: Kinetics, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            k,
            level: Level::Ground,
        }
    }

    fn exit_rate(&self, pump: f64) -> f64 {
        match self.level {
            Level::Ground => pump,
            Level::Excited => self.k.excited_decay(),
            Level::Triplet => self.k.triplet_decay,
        }
    }

    /// Draws one step. Returns `None` if the current level is absorbing.
    fn step(&mut self, pump: f64) -> Option<(f64, Outcome)> {
        let u_wait: f64 = self.rng.random();
        let u_pick: f64 = self.rng.random();
        let u_label: f64 = self.rng.random();
        let rate = self.exit_rate(pump);
        if !(rate > 0.0) {
            return None;
        }
        // 1 - u lies in (0, 1], so the logarithm stays finite.
        let wait = -(1.0 - u_wait).ln() / rate;
        let outcome = match self.level {
            Level::Ground => {
                self.level = Level::Excited;
                Outcome::Silent
            }
            Level::Triplet => {
                self.level = Level::Ground;
                Outcome::Silent
            }
            Level::Excited => {
                let x = u_pick * rate;
                let rad = self.k.radiative();
                if x < rad {
                    self.level = Level::Ground;
                    let channel = if u_label * rad < self.k.zpl {
                        Channel::Zpl
                    } else {
                        Channel::Sideband
                    };
                    Outcome::Photon(channel)
                } else if x < rad + self.k.nonradiative {
                    self.level = Level::Ground;
                    Outcome::Silent
                } else {
                    self.level = Level::Triplet;
                    Outcome::Silent
                }
            }
        };
        Some((wait, outcome))
    }
}

/// Appends a tag, nudging it forward by whole picoseconds if it would
/// collide with the previous one.
fn push_tag(tags: &mut Vec<u64>, channels: &mut Vec<Channel>, t_ps: u64, channel: Channel) {
    let t = match tags.last() {
        Some(&last) if t_ps <= last => last + 1,
        _ => t_ps,
    };
    tags.push(t);
    channels.push(channel);
}

/// Continuous-wave excitation: Gillespie trajectory starting in `G` at t = 0.
pub fn simulate_cw(params: &EmitterParams, enhancement: f64, duration_ps: u64, seed: u64) -> Result<PhotonStream> {
    params.validate()?;
    check_enhancement(enhancement)?;
    let k = params.kinetics(enhancement);
    let mut sampler = Sampler::new(k, seed);
    let mut tags = Vec::new();
    let mut channels = Vec::new();
    let end_ns = duration_ps as f64 * 1e-3;
    let mut t_ns = 0.0;
    while let Some((wait, outcome)) = sampler.step(k.pump) {
        t_ns += wait;
        if t_ns >= end_ns {
            break;
        }
        if let Outcome::Photon(c) = outcome {
            push_tag(&mut tags, &mut channels, (t_ns * 1e3) as u64, c);
        }
    }
    while tags.last().is_some_and(|&t| t >= duration_ps) {
        tags.pop();
        channels.pop();
    }
    Ok(PhotonStream::from_parts_unchecked(tags, channels, duration_ps, seed))
}

/// Splits a CW run into `shards` equal segments sampled concurrently with
/// derived seeds and concatenated in order. Each segment starts from `G`.
/// With `shards == 1` this is exactly [`simulate_cw`].
pub fn simulate_cw_sharded(
    params: &EmitterParams,
    enhancement: f64,
    duration_ps: u64,
    seed: u64,
    shards: usize,
) -> Result<PhotonStream> {
    if shards <= 1 {
        return simulate_cw(params, enhancement, duration_ps, seed);
    }
    let shards = shards as u64;
    let base = duration_ps / shards;
    let parts: Vec<PhotonStream> = (0..shards)
        .into_par_iter()
        .map(|i| {
            let len = if i + 1 == shards { duration_ps - base * (shards - 1) } else { base };
            simulate_cw(params, enhancement, len, derive_seed(seed, i))
        })
        .collect::<Result<_>>()?;
    let mut out = PhotonStream::empty(0, seed);
    for p in &parts {
        out = out.concat(p);
    }
    Ok(PhotonStream::from_parts_unchecked(
        out.tags().to_vec(),
        out.channels().to_vec(),
        duration_ps,
        seed,
    ))
}

/// Delta-pulse excitation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsedExcitation {
    pub rep_period_ns: f64,
    pub n_pulses: u64,
    /// Probability that a pulse promotes `G → S` (no effect in `S` or `T`).
    pub excitation_probability: f64,
}

impl PulsedExcitation {
    pub fn period_ps(&self) -> u64 {
        (self.rep_period_ns * 1e3).round() as u64
    }
}

/// Pulsed excitation: each pulse at `k·T` excites the emitter with the given
/// probability if it is in `G`; relaxation between pulses follows the same
/// Gillespie dynamics with the pump switched off.
pub fn simulate_pulsed(
    params: &EmitterParams,
    enhancement: f64,
    pulses: PulsedExcitation,
    seed: u64,
) -> Result<PhotonStream> {
    params.validate()?;
    check_enhancement(enhancement)?;
    if !(pulses.rep_period_ns > 0.0) || pulses.period_ps() == 0 {
        return Err(Error::domain("rep_period_ns", format!("must be > 0, got {}", pulses.rep_period_ns)));
    }
    let p_exc = pulses.excitation_probability;
    if !(0.0..=1.0).contains(&p_exc) {
        return Err(Error::domain("excitation_probability", format!("must lie in [0, 1], got {p_exc}")));
    }
    let period_ps = pulses.period_ps();
    let period_ns = period_ps as f64 * 1e-3;
    let duration_ps = period_ps
        .checked_mul(pulses.n_pulses)
        .ok_or_else(|| Error::domain("n_pulses", "run length overflows u64 picoseconds"))?;

    let k = params.kinetics(enhancement);
    let mut sampler = Sampler::new(k, seed);
    let mut tags = Vec::new();
    let mut channels = Vec::new();
    for pulse in 0..pulses.n_pulses {
        let u: f64 = sampler.rng.random();
        if sampler.level == Level::Ground && u < p_exc {
            sampler.level = Level::Excited;
        }
        let origin = pulse * period_ps;
        let mut local_ns = 0.0;
        while sampler.level != Level::Ground {
            let Some((wait, outcome)) = sampler.step(0.0) else { break };
            // Memoryless: a transition that would land after the next pulse
            // is simply redrawn then.
            if local_ns + wait >= period_ns {
                break;
            }
            local_ns += wait;
            if let Outcome::Photon(c) = outcome {
                let offset = ((local_ns * 1e3) as u64).min(period_ps - 1);
                push_tag(&mut tags, &mut channels, origin + offset, c);
            }
        }
    }
    while tags.last().is_some_and(|&t| t >= duration_ps) {
        tags.pop();
        channels.pop();
    }
    Ok(PhotonStream::from_parts_unchecked(tags, channels, duration_ps, seed))
}

/// Merges a homogeneous Poisson process of `Background` tags at `rate_cps`
/// counts per second into `stream`.
pub fn add_background(stream: &PhotonStream, rate_cps: f64, seed: u64) -> Result<PhotonStream> {
    if !(rate_cps.is_finite() && rate_cps >= 0.0) {
        return Err(Error::domain("background_cps", format!("must be finite and >= 0, got {rate_cps}")));
    }
    if rate_cps == 0.0 || stream.duration_ps() == 0 {
        return Ok(stream.clone());
    }
    let duration = stream.duration_ps();
    let rate_per_ps = rate_cps * 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut background = Vec::new();
    let mut t = 0.0f64;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / rate_per_ps;
        if t >= duration as f64 {
            break;
        }
        background.push(t as u64);
    }

    let mut tags = Vec::with_capacity(stream.len() + background.len());
    let mut channels = Vec::with_capacity(tags.capacity());
    let signal = stream.tags();
    let labels = stream.channels();
    let (mut i, mut j) = (0, 0);
    while i < signal.len() || j < background.len() {
        let take_signal = j >= background.len() || (i < signal.len() && signal[i] <= background[j]);
        if take_signal {
            push_tag(&mut tags, &mut channels, signal[i], labels[i]);
            i += 1;
        } else {
            push_tag(&mut tags, &mut channels, background[j], Channel::Background);
            j += 1;
        }
    }
    while tags.last().is_some_and(|&t| t >= duration) {
        tags.pop();
        channels.pop();
    }
    Ok(PhotonStream::from_parts_unchecked(tags, channels, duration, stream.seed()))
}

fn check_enhancement(f: f64) -> Result<()> {
    if f.is_finite() && f >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain("enhancement", format!("must be finite and >= 0, got {f}")))
    }
}
