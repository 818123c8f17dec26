//! Multi-person training-set synthesis from single-person recordings.
//!
//! Sequences for `n` people are the bitwise OR of `n` distinct single-person
//! sequences. Every class is then brought to exactly `w + 1` samples: large
//! classes stop drawing combinations early, small classes are topped up with
//! single-bit-flip copies of their own samples.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BlockageSequence, LabeledDataset, LabeledSample, Origin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    /// Number of collected single-person sequences.
    pub m: usize,
    /// Largest count class.
    pub max_count: usize,
    /// Slots per sequence.
    pub w: usize,
    pub rng_seed: u64,
}

impl SynthesisPlan {
    pub fn new(m: usize, max_count: usize, w: usize, rng_seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("need at least one original sequence".into()));
        }
        if max_count == 0 {
            return Err(Error::Config("max_count must be at least 1".into()));
        }
        if w == 0 {
            return Err(Error::Config("sequences need at least one slot".into()));
        }
        Ok(Self {
            m,
            max_count,
            w,
            rng_seed,
        })
    }

    /// Samples per class after balancing: the size of the empty-room class.
    pub fn target_per_class(&self) -> usize {
        self.w + 1
    }
}

/// Independent random stream for one count class.
pub fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class as u64);
    rng
}

/// Bitwise OR of equally long sequences.
pub fn superpose<'a, I>(sequences: I) -> Result<BlockageSequence>
where
    I: IntoIterator<Item = &'a BlockageSequence>,
{
    let mut iter = sequences.into_iter();
    let first = iter.next().ok_or(Error::EmptySuperposition)?;
    let mut bits = first.bits().to_vec();
    for s in iter {
        if s.len() != bits.len() {
            return Err(Error::LengthMismatch {
                expected: bits.len(),
                actual: s.len(),
            });
        }
        for (b, &x) in bits.iter_mut().zip(s.bits()) {
            *b |= x;
        }
    }
    Ok(BlockageSequence::from_bits(bits, first.slot_duration()))
}

/// Copy of `sequence` with one uniformly chosen bit inverted; also returns
/// the flipped index.
pub fn flip_random_bit<R: Rng + ?Sized>(
    sequence: &BlockageSequence,
    rng: &mut R,
) -> (BlockageSequence, usize) {
    let i = rng.random_range(0..sequence.len());
    (sequence.with_flipped(i), i)
}

/// The empty-room class: the all-zero sequence plus each of its `w`
/// single-bit flips.
pub fn zero_class_set(w: usize, slot_duration: f64) -> Vec<LabeledSample> {
    let zeros = BlockageSequence::zeros(w, slot_duration);
    let mut out = Vec::with_capacity(w + 1);
    out.push(LabeledSample {
        sequence: zeros.clone(),
        label: 0,
        origin: Origin::Collected { original: None },
    });
    out.extend((0..w).map(|bit| LabeledSample {
        sequence: zeros.with_flipped(bit),
        label: 0,
        origin: Origin::Noised { source: 0, bit },
    }));
    out
}

/// Size of class `n` before balancing when built from `m` originals:
/// the number of `n`-subsets, C(m, n). Saturates at `u128::MAX`.
pub fn unbalanced_class_size(m: usize, n: usize) -> u128 {
    if n > m {
        return 0;
    }
    let n = n.min(m - n);
    let mut acc: u128 = 1;
    for k in 0..n {
        // acc * (m - k) / (k + 1) stays integral at every step.
        acc = match acc.checked_mul((m - k) as u128) {
            Some(v) => v / (k as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Up to `limit` distinct `n`-subsets of `0..m`, in random order, each sorted.
fn draw_combinations<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    limit: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let total = unbalanced_class_size(m, n);
    if total <= 4 * limit as u128 {
        let mut all = all_combinations(m, n);
        all.shuffle(rng);
        all.truncate(limit);
        return all;
    }
    let mut seen = HashSet::with_capacity(limit);
    let mut out = Vec::with_capacity(limit);
    while out.len() < limit {
        let mut combo = rand::seq::index::sample(rng, m, n).into_vec();
        combo.sort_unstable();
        if seen.insert(combo.clone()) {
            out.push(combo);
        }
    }
    out
}

/// Every `n`-subset of `0..m` in lexicographic order.
fn all_combinations(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        out.push(idx.clone());
        // Rightmost position that can still advance.
        let Some(pos) = (0..n).rev().find(|&i| idx[i] < m - n + i) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Builds the `w + 1` samples of count class `n >= 1`.
pub fn balance_class<R: Rng + ?Sized>(
    n: usize,
    originals: &[BlockageSequence],
    plan: &SynthesisPlan,
    rng: &mut R,
) -> Result<Vec<LabeledSample>> {
    if n == 0 || n > plan.max_count {
        return Err(Error::Config(format!(
            "class {n} is outside 1..={}",
            plan.max_count
        )));
    }
    let m = originals.len();
    if n > m {
        return Err(Error::InfeasibleClass {
            class: n,
            available: m,
        });
    }
    for s in originals {
        if s.len() != plan.w {
            return Err(Error::LengthMismatch {
                expected: plan.w,
                actual: s.len(),
            });
        }
    }

    let target = plan.target_per_class();
    let mut out = Vec::with_capacity(target);
    for combo in draw_combinations(m, n, target, rng) {
        let sequence = superpose(combo.iter().map(|&i| &originals[i]))?;
        let origin = if n == 1 {
            Origin::Collected {
                original: Some(combo[0]),
            }
        } else {
            Origin::Superposed {
                constituents: combo,
            }
        };
        out.push(LabeledSample {
            sequence,
            label: n,
            origin,
        });
    }

    let sources = out.len();
    while out.len() < target {
        let source = rng.random_range(0..sources);
        let (sequence, bit) = flip_random_bit(&out[source].sequence, rng);
        out.push(LabeledSample {
            sequence,
            label: n,
            origin: Origin::Noised { source, bit },
        });
    }
    Ok(out)
}

/// Full balanced training set for classes `0..=plan.max_count`.
///
/// Each class draws from its own seeded stream, so the result depends only
/// on `(originals, plan)`.
pub fn build_dataset(originals: &[BlockageSequence], plan: &SynthesisPlan) -> Result<LabeledDataset> {
    if originals.is_empty() {
        return Err(Error::Config("need at least one original sequence".into()));
    }
    if originals.len() != plan.m {
        return Err(Error::Config(format!(
            "plan expects {} originals, got {}",
            plan.m,
            originals.len()
        )));
    }
    if plan.max_count > plan.m {
        return Err(Error::InfeasibleClass {
            class: plan.m + 1,
            available: plan.m,
        });
    }
    let slot = originals[0].slot_duration();
    let mut samples = zero_class_set(plan.w, slot);
    for n in 1..=plan.max_count {
        let mut rng = class_rng(plan.rng_seed, n);
        samples.extend(balance_class(n, originals, plan, &mut rng)?);
    }
    LabeledDataset::new(samples, plan.max_count, plan.w)
}
