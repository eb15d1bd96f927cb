//! Time-tagged photon streams and their on-disk formats.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic    [u8; 4]  = b"GCTS"
//! version  u32      = 1
//! duration u64      picoseconds
//! seed     u64
//! count    u64
//! count × { timestamp u64 (ps), channel u8 }
//! ```
//!
//! The NDJSON export writes one header object followed by one object per tag.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"GCTS";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

/// Origin label carried by each photon tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Zpl,
    Sideband,
    Background,
}

impl Channel {
    pub fn code(self) -> u8 {
        match self {
            Channel::Zpl => 0,
            Channel::Sideband => 1,
            Channel::Background => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Channel::Zpl),
            1 => Ok(Channel::Sideband),
            2 => Ok(Channel::Background),
            other => Err(Error::Format(format!("unknown channel code {other}"))),
        }
    }
}

/// Strictly increasing photon time tags (integer picoseconds) with labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhotonStream {
    tags: Vec<u64>,
    channels: Vec<Channel>,
    duration_ps: u64,
    seed: u64,
}

impl PhotonStream {
    pub fn empty(duration_ps: u64, seed: u64) -> Self {
        Self {
            tags: Vec::new(),
            channels: Vec::new(),
            duration_ps,
            seed,
        }
    }

    /// Builds a stream, checking that tags are strictly increasing and lie
    /// inside `[0, duration_ps)`.
    pub fn new(tags: Vec<u64>, channels: Vec<Channel>, duration_ps: u64, seed: u64) -> Result<Self> {
        if tags.len() != channels.len() {
            return Err(Error::Contract(format!(
                "{} tags but {} channel labels",
                tags.len(),
                channels.len()
            )));
        }
        if let Some(i) = tags.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!(
                "tags not strictly increasing at index {}: {} then {}",
                i + 1,
                tags[i],
                tags[i + 1]
            )));
        }
        if let Some(&last) = tags.last() {
            if last >= duration_ps {
                return Err(Error::Contract(format!(
                    "tag {last} ps is not below the stream duration {duration_ps} ps"
                )));
            }
        }
        Ok(Self {
            tags,
            channels,
            duration_ps,
            seed,
        })
    }

    /// Builder used by the samplers, which maintain the invariants themselves.
    pub(crate) fn from_parts_unchecked(
        tags: Vec<u64>,
        channels: Vec<Channel>,
        duration_ps: u64,
        seed: u64,
    ) -> Self {
        debug_assert!(tags.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(tags.last().is_none_or(|&t| t < duration_ps));
        Self {
            tags,
            channels,
            duration_ps,
            seed,
        }
    }

    pub fn tags(&self) -> &[u64] {
        &self.tags
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Channel)> + '_ {
        self.tags.iter().copied().zip(self.channels.iter().copied())
    }

    /// Mean count rate in counts per picosecond.
    pub fn rate_per_ps(&self) -> f64 {
        if self.duration_ps == 0 {
            0.0
        } else {
            self.tags.len() as f64 / self.duration_ps as f64
        }
    }

    pub fn count_channel(&self, channel: Channel) -> usize {
        self.channels.iter().filter(|&&c| c == channel).count()
    }

    /// Keeps only tags whose label satisfies `keep`.
    pub fn filter_channels(&self, keep: impl Fn(Channel) -> bool) -> PhotonStream {
        let (tags, channels) = self.iter().filter(|&(_, c)| keep(c)).unzip();
        Self::from_parts_unchecked(tags, channels, self.duration_ps, self.seed)
    }

    /// The first `n` tags; the duration is cut just after the last kept tag
    /// so rates stay meaningful.
    pub fn truncate_to_count(&self, n: usize) -> PhotonStream {
        if n >= self.len() {
            return self.clone();
        }
        let duration = if n == 0 { 0 } else { self.tags[n - 1] + 1 };
        Self::from_parts_unchecked(
            self.tags[..n].to_vec(),
            self.channels[..n].to_vec(),
            duration,
            self.seed,
        )
    }

    /// Appends `other` shifted by this stream's duration.
    pub fn concat(mut self, other: &PhotonStream) -> PhotonStream {
        let offset = self.duration_ps;
        self.tags.extend(other.tags.iter().map(|t| t + offset));
        self.channels.extend_from_slice(&other.channels);
        self.duration_ps += other.duration_ps;
        self
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(&MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        header.extend_from_slice(&self.duration_ps.to_le_bytes());
        header.extend_from_slice(&self.seed.to_le_bytes());
        header.extend_from_slice(&(self.tags.len() as u64).to_le_bytes());
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(9 * self.tags.len().min(1 << 16));
        for (t, c) in self.iter() {
            buf.extend_from_slice(&t.to_le_bytes());
            buf.push(c.code());
            if buf.len() >= 9 << 16 {
                w.write_all(&buf)?;
                buf.clear();
            }
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        if header[..4] != MAGIC {
            return Err(Error::Format("bad magic, not a photon stream file".into()));
        }
        let u64_at = |at: usize| u64::from_le_bytes(header[at..at + 8].try_into().unwrap());
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let duration = u64_at(8);
        let seed = u64_at(16);
        let count = usize::try_from(u64_at(24))
            .map_err(|_| Error::Format("record count does not fit in memory".into()))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != count * 9 {
            return Err(Error::Format(format!(
                "header announces {count} records but body holds {} bytes",
                body.len()
            )));
        }
        let mut tags = Vec::with_capacity(count);
        let mut channels = Vec::with_capacity(count);
        for rec in body.chunks_exact(9) {
            tags.push(u64::from_le_bytes(rec[..8].try_into().unwrap()));
            channels.push(Channel::from_code(rec[8])?);
        }
        Self::new(tags, channels, duration, seed).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        let header = NdjsonHeader {
            format: "gcavity-photon-stream".into(),
            version: FORMAT_VERSION,
            duration_ps: self.duration_ps,
            seed: self.seed,
            count: self.tags.len() as u64,
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for (t_ps, channel) in self.iter() {
            serde_json::to_writer(&mut w, &NdjsonTag { t_ps, channel })?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty NDJSON stream".into()))??;
        let header: NdjsonHeader = serde_json::from_str(&first)?;
        let mut tags = Vec::with_capacity(header.count as usize);
        let mut channels = Vec::with_capacity(header.count as usize);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: NdjsonTag = serde_json::from_str(&line)?;
            tags.push(rec.t_ps);
            channels.push(rec.channel);
        }
        if tags.len() as u64 != header.count {
            return Err(Error::Format(format!(
                "header announces {} tags, found {}",
                header.count,
                tags.len()
            )));
        }
        Self::new(tags, channels, header.duration_ps, header.seed)
    }
}

#[derive(Serialize, Deserialize)]
struct NdjsonHeader {
    format: String,
    version: u32,
    duration_ps: u64,
    seed: u64,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct NdjsonTag {
    t_ps: u64,
    channel: Channel,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> PhotonStream {
        PhotonStream::new(
            vec![3, 10, 11, 900],
            vec![Channel::Zpl, Channel::Sideband, Channel::Background, Channel::Zpl],
            1000,
            42,
        )
        .unwrap()
    }

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        assert!(PhotonStream::new(vec![5, 5], vec![Channel::Zpl; 2], 10, 0).is_err());
        assert!(PhotonStream::new(vec![5, 4], vec![Channel::Zpl; 2], 10, 0).is_err());
        assert!(PhotonStream::new(vec![10], vec![Channel::Zpl], 10, 0).is_err());
        assert!(PhotonStream::new(vec![1], vec![], 10, 0).is_err());
    }

    #[test]
    fn binary_layout_is_stable() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 4 * 9);
        assert_eq!(&buf[..4], b"GCTS");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 1000);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 42);
        assert_eq!(u64::from_le_bytes(buf[24..32].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(buf[32..40].try_into().unwrap()), 3);
        assert_eq!(buf[40], 0);
        assert_eq!(buf[HEADER_LEN + 2 * 9 + 8], 2);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(PhotonStream::read_binary(&bad_magic[..]), Err(Error::Format(_))));
        let truncated = &buf[..buf.len() - 1];
        assert!(matches!(PhotonStream::read_binary(truncated), Err(Error::Format(_))));
        let mut bad_channel = buf.clone();
        let last = bad_channel.len() - 1;
        bad_channel[last] = 7;
        assert!(PhotonStream::read_binary(&bad_channel[..]).is_err());
    }

    #[test]
    fn truncate_and_concat() {
        let s = sample();
        let t = s.truncate_to_count(2);
        assert_eq!(t.tags(), &[3, 10]);
        assert_eq!(t.duration_ps(), 11);
        let joined = s.clone().concat(&s);
        assert_eq!(joined.len(), 8);
        assert_eq!(joined.tags()[4], 1003);
        assert_eq!(joined.duration_ps(), 2000);
    }

    fn arb_stream() -> impl Strategy<Value = PhotonStream> {
        (proptest::collection::vec((1u64..5000, 0u8..3), 0..200), any::<u64>()).prop_map(|(gaps, seed)| {
            let mut t = 0u64;
            let mut tags = Vec::new();
            let mut channels = Vec::new();
            for (g, c) in gaps {
                t += g;
                tags.push(t);
                channels.push(Channel::from_code(c).unwrap());
            }
            let duration = t + 1 + seed % 1000;
            PhotonStream::new(tags, channels, duration, seed).unwrap()
        })
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(s in arb_stream()) {
            let mut buf = Vec::new();
            s.write_binary(&mut buf).unwrap();
            let back = PhotonStream::read_binary(&buf[..]).unwrap();
            prop_assert_eq!(&back, &s);
            let mut again = Vec::new();
            back.write_binary(&mut again).unwrap();
            prop_assert_eq!(buf, again);
        }

        #[test]
        fn ndjson_round_trip(s in arb_stream()) {
            let mut buf = Vec::new();
            s.write_ndjson(&mut buf).unwrap();
            let back = PhotonStream::read_ndjson(&buf[..]).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
