//! Domain types shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One received-signal-strength sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssReading {
    /// Seconds since the start of the window.
    pub t: f64,
    /// Signal strength in dBm.
    pub rss: f64,
}

/// Timestamped RSS readings from one link over one counting window.
///
/// Readings are strictly increasing in time and lie in `[0, window_length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssTrace {
    readings: Vec<RssReading>,
    window_length: f64,
}

impl RssTrace {
    pub fn new(readings: Vec<RssReading>, window_length: f64) -> Result<Self> {
        if !(window_length.is_finite() && window_length > 0.0) {
            return Err(Error::InvalidTrace(format!(
                "window length must be positive, got {window_length}"
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for (j, r) in readings.iter().enumerate() {
            if !r.t.is_finite() || !r.rss.is_finite() {
                return Err(Error::InvalidTrace(format!("reading {j} is not finite")));
            }
            if r.t < 0.0 || r.t >= window_length {
                return Err(Error::InvalidTrace(format!(
                    "reading {j} at t={} s is outside [0, {window_length})",
                    r.t
                )));
            }
            if r.t <= prev {
                return Err(Error::InvalidTrace(format!(
                    "reading {j} at t={} s does not follow t={prev} s",
                    r.t
                )));
            }
            prev = r.t;
        }
        Ok(Self {
            readings,
            window_length,
        })
    }

    pub fn readings(&self) -> &[RssReading] {
        &self.readings
    }

    pub fn window_length(&self) -> f64 {
        self.window_length
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    /// Returns a copy with `offset` dBm added to every reading.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            readings: self
                .readings
                .iter()
                .map(|r| RssReading {
                    t: r.t,
                    rss: r.rss + offset,
                })
                .collect(),
            window_length: self.window_length,
        }
    }
}

/// Fixed-length binary stream, one bit per time slot; `true` means the
/// line of sight was blocked at least once during that slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockageSequence {
    bits: Vec<bool>,
    slot_duration: SlotDuration,
}

/// Slot duration in seconds, stored by bit pattern so sequences can be
/// compared and hashed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
struct SlotDuration(u64);

impl From<f64> for SlotDuration {
    fn from(v: f64) -> Self {
        SlotDuration(v.to_bits())
    }
}

impl From<SlotDuration> for f64 {
    fn from(v: SlotDuration) -> Self {
        f64::from_bits(v.0)
    }
}

impl BlockageSequence {
    pub fn zeros(w: usize, slot_duration: f64) -> Self {
        Self::from_bits(vec![false; w], slot_duration)
    }

    pub fn from_bits(bits: Vec<bool>, slot_duration: f64) -> Self {
        Self {
            bits,
            slot_duration: slot_duration.into(),
        }
    }

    /// Builds a sequence of length `w` with the given slots set.
    pub fn from_ones(w: usize, ones: &[usize], slot_duration: f64) -> Result<Self> {
        let mut bits = vec![false; w];
        for &i in ones {
            if i >= w {
                return Err(Error::LengthMismatch {
                    expected: w,
                    actual: i + 1,
                });
            }
            bits[i] = true;
        }
        Ok(Self::from_bits(bits, slot_duration))
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse_bitstring(s: &str, slot_duration: f64) -> Option<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self::from_bits(bits, slot_duration))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration.into()
    }

    /// Start time of slot `i` relative to the window start.
    pub fn slot_start(&self, i: usize) -> f64 {
        i as f64 * self.slot_duration()
    }

    /// Indices of the set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &Self) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
            + self.len().abs_diff(other.len())
    }

    /// Returns a copy with bit `i` inverted.
    pub fn with_flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.bits[i] = !out.bits[i];
        out
    }

    /// `true` when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.len() == other.len() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

impl fmt::Display for BlockageSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// How a training sample came to exist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Recorded directly. `original` is the index into the collected
    /// single-person set; `None` for the empty-room sequence.
    Collected { original: Option<usize> },
    /// Bitwise OR of the listed originals (indices ascending).
    Superposed { constituents: Vec<usize> },
    /// `source` (an index into the same class's sample list) with one bit flipped.
    Noised { source: usize, bit: usize },
}

impl Origin {
    pub fn kind(&self) -> OriginKind {
        match self {
            Origin::Collected { .. } => OriginKind::Collected,
            Origin::Superposed { .. } => OriginKind::Superposed,
            Origin::Noised { .. } => OriginKind::Noised,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OriginKind {
    Collected,
    Superposed,
    Noised,
}

impl fmt::Display for OriginKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OriginKind::Collected => "collected",
            OriginKind::Superposed => "superposed",
            OriginKind::Noised => "noised",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sequence: BlockageSequence,
    pub label: usize,
    pub origin: Origin,
}

impl LabeledSample {
    pub fn new(sequence: BlockageSequence, label: usize, origin: Origin) -> Result<Self> {
        if origin.kind() == OriginKind::Collected && label > 1 {
            return Err(Error::Config(format!(
                "collected samples exist only for classes 0 and 1, got class {label}"
            )));
        }
        Ok(Self {
            sequence,
            label,
            origin,
        })
    }
}

/// Per-class origin tally.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OriginCounts {
    pub collected: usize,
    pub superposed: usize,
    pub noised: usize,
}

impl OriginCounts {
    pub fn total(&self) -> usize {
        self.collected + self.superposed + self.noised
    }
}

/// Training set covering count classes `0..=max_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    samples: Vec<LabeledSample>,
    max_count: usize,
    w: usize,
}

impl LabeledDataset {
    pub fn new(samples: Vec<LabeledSample>, max_count: usize, w: usize) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.sequence.len() != w {
                return Err(Error::LengthMismatch {
                    expected: w,
                    actual: s.sequence.len(),
                });
            }
            if s.label > max_count {
                return Err(Error::Config(format!(
                    "sample {i} has label {} above the maximum class {max_count}",
                    s.label
                )));
            }
        }
        Ok(Self {
            samples,
            max_count,
            w,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn max_count(&self) -> usize {
        self.max_count
    }

    pub fn num_classes(&self) -> usize {
        self.max_count + 1
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_classes()];
        for s in &self.samples {
            sizes[s.label] += 1;
        }
        sizes
    }

    pub fn origin_counts(&self, class: usize) -> OriginCounts {
        let mut c = OriginCounts::default();
        for s in self.samples.iter().filter(|s| s.label == class) {
            match s.origin.kind() {
                OriginKind::Collected => c.collected += 1,
                OriginKind::Superposed => c.superposed += 1,
                OriginKind::Noised => c.noised += 1,
            }
        }
        c
    }

    /// `true` when every class holds exactly `w + 1` samples.
    pub fn is_balanced(&self) -> bool {
        self.class_sizes().iter().all(|&n| n == self.w + 1)
    }
}
