//! Line-of-sight blockage detection by thresholding RSS against the window mean.

use serde::{Deserialize, Serialize};

use crate::config::{DetectorMode, SystemConfig};
use crate::error::{Error, Result};
use crate::types::{BlockageSequence, RssReading, RssTrace};
use crate::window::slot_index;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Threshold in dBm, relative to the window mean.
    pub tau: f64,
    pub mode: DetectorMode,
    pub slot_duration: f64,
    /// Slots per window.
    pub w: usize,
}

impl DetectorParams {
    pub fn new(tau: f64, mode: DetectorMode, slot_duration: f64, w: usize) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::Config(format!("tau must be non-negative, got {tau}")));
        }
        if w == 0 {
            return Err(Error::Config("detector needs at least one slot".into()));
        }
        if !(slot_duration.is_finite() && slot_duration > 0.0) {
            return Err(Error::Config(format!(
                "slot duration must be positive, got {slot_duration}"
            )));
        }
        Ok(Self {
            tau,
            mode,
            slot_duration,
            w,
        })
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        Self::new(cfg.tau, cfg.detector_mode, cfg.slot_duration, cfg.w()?)
    }

    pub fn window_seconds(&self) -> f64 {
        self.w as f64 * self.slot_duration
    }

    /// Whether a reading `deviation` dBm away from the mean is a blockage.
    #[inline]
    pub fn is_blockage(&self, deviation: f64) -> bool {
        match self.mode {
            DetectorMode::Attenuation => deviation <= -self.tau,
            DetectorMode::Elevation => deviation >= self.tau,
            DetectorMode::Deviation => deviation.abs() >= self.tau,
        }
    }
}

/// Arithmetic mean of all readings in the window.
pub fn mean_rss(trace: &RssTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let sum: f64 = trace.readings().iter().map(|r| r.rss).sum();
    Ok(sum / trace.len() as f64)
}

/// Converts one window of RSS readings into a blockage sequence.
///
/// Slot `i` is set when any reading with `T_i <= t < T_{i+1}` deviates from
/// the trace mean in the direction selected by `params.mode` by at least
/// `params.tau`.
pub fn detect_blockages(trace: &RssTrace, params: &DetectorParams) -> Result<BlockageSequence> {
    let mean = mean_rss(trace)?;
    let expected = params.window_seconds();
    if (trace.window_length() - expected).abs() > 1e-9 * expected {
        return Err(Error::WindowMismatch {
            trace: trace.window_length(),
            expected,
        });
    }
    let mut bits = vec![false; params.w];
    for r in trace.readings() {
        if params.is_blockage(r.rss - mean) {
            bits[slot_index(r.t, params.slot_duration, params.w)] = true;
        }
    }
    Ok(BlockageSequence::from_bits(bits, params.slot_duration))
}

/// Cuts a long trace into consecutive windows of `window_seconds`, re-basing
/// times to each window start. A trailing partial window is dropped.
pub fn split_trace(trace: &RssTrace, window_seconds: f64) -> Result<Vec<RssTrace>> {
    let total = trace.window_length();
    if total < window_seconds {
        return Err(Error::DurationTooShort {
            duration: total,
            window: window_seconds,
        });
    }
    let count = (total / window_seconds + 1e-9).floor() as usize;
    let mut buckets: Vec<Vec<RssReading>> = vec![Vec::new(); count];
    for r in trace.readings() {
        let k = (r.t / window_seconds).floor() as usize;
        if k < count {
            let t = (r.t - k as f64 * window_seconds).clamp(0.0, window_seconds.next_down());
            buckets[k].push(RssReading { t, rss: r.rss });
        }
    }
    buckets
        .into_iter()
        .map(|readings| RssTrace::new(readings, window_seconds))
        .collect()
}

/// Splits a long trace into counting windows and detects each one.
pub fn detect_windows(trace: &RssTrace, params: &DetectorParams) -> Result<Vec<BlockageSequence>> {
    split_trace(trace, params.window_seconds())?
        .iter()
        .map(|t| detect_blockages(t, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn trace(pairs: &[(f64, f64)], window: f64) -> RssTrace {
        RssTrace::new(
            pairs
                .iter()
                .map(|&(t, rss)| RssReading { t, rss })
                .collect(),
            window,
        )
        .unwrap()
    }

    fn random_trace(rng: &mut impl Rng, w: usize) -> RssTrace {
        let n = rng.random_range(1..200);
        let mut ts: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..w as f64)).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let pairs: Vec<(f64, f64)> = ts
            .into_iter()
            .map(|t| (t, -40.0 + rng.random_range(-12.0..6.0)))
            .collect();
        trace(&pairs, w as f64)
    }

    /// Brute force: for every slot, rescan every reading.
    fn oracle(trace: &RssTrace, tau: f64, mode: DetectorMode, w: usize) -> Vec<bool> {
        let rs = trace.readings();
        let mut total = 0.0;
        for r in rs {
            total += r.rss;
        }
        let mean = total / rs.len() as f64;
        (0..w)
            .map(|i| {
                rs.iter().any(|r| {
                    let in_slot = r.t >= i as f64 && r.t < (i + 1) as f64;
                    let hit = match mode {
                        DetectorMode::Attenuation => r.rss - mean <= -tau,
                        DetectorMode::Elevation => r.rss - mean >= tau,
                        DetectorMode::Deviation => (r.rss - mean).abs() >= tau,
                    };
                    in_slot && hit
                })
            })
            .collect()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_rss(&trace(&[(0.0, -40.0), (1.0, -40.0)], 2.0)).unwrap(), -40.0);
        let t = trace(
            &[(0.2, -40.0), (0.7, -41.0), (1.3, -39.0), (1.6, -48.0), (2.4, -40.0)],
            3.0,
        );
        assert!((mean_rss(&t).unwrap() + 41.6).abs() < 1e-12);
        assert!(matches!(
            mean_rss(&RssTrace::new(vec![], 1.0).unwrap()),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn mean_matches_one_pass_summation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pairs: Vec<(f64, f64)> = (0..10_000)
            .map(|k| (k as f64 * 0.01, rng.random_range(-90.0..-20.0)))
            .collect();
        let t = trace(&pairs, 100.0);
        let mut acc = 0.0;
        let mut n = 0.0;
        for &(_, r) in &pairs {
            n += 1.0;
            acc += (r - acc) / n;
        }
        assert!((mean_rss(&t).unwrap() - acc).abs() < 1e-9);
    }

    #[test]
    fn constant_trace_never_blocks() {
        let pairs: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.1, -40.0)).collect();
        let t = trace(&pairs, 5.0);
        for mode in [
            DetectorMode::Attenuation,
            DetectorMode::Deviation,
            DetectorMode::Elevation,
        ] {
            let p = DetectorParams::new(5.0, mode, 1.0, 5).unwrap();
            assert_eq!(detect_blockages(&t, &p).unwrap().popcount(), 0);
        }
    }

    #[test]
    fn hand_worked_attenuation_example() {
        let t = trace(
            &[(0.2, -40.0), (0.7, -41.0), (1.3, -39.0), (1.6, -48.0), (2.4, -40.0)],
            3.0,
        );
        let p = DetectorParams::new(5.0, DetectorMode::Attenuation, 1.0, 3).unwrap();
        let s = detect_blockages(&t, &p).unwrap();
        assert_eq!(s.bits(), &[false, true, false]);
        // Same readings, the literal upward test finds nothing: max is -39 < -36.6.
        let p = DetectorParams::new(5.0, DetectorMode::Elevation, 1.0, 3).unwrap();
        assert_eq!(detect_blockages(&t, &p).unwrap().popcount(), 0);
    }

    #[test]
    fn reading_on_slot_boundary_goes_to_next_slot() {
        let t = trace(&[(0.5, -40.0), (1.0, -60.0), (1.5, -40.0)], 2.0);
        let p = DetectorParams::new(5.0, DetectorMode::Attenuation, 1.0, 2).unwrap();
        assert_eq!(detect_blockages(&t, &p).unwrap().bits(), &[false, true]);
    }

    #[test]
    fn window_mismatch_rejected() {
        let t = trace(&[(0.5, -40.0)], 4.0);
        let p = DetectorParams::new(5.0, DetectorMode::Attenuation, 1.0, 3).unwrap();
        assert!(matches!(
            detect_blockages(&t, &p),
            Err(Error::WindowMismatch { .. })
        ));
        let empty = RssTrace::new(vec![], 3.0).unwrap();
        assert!(matches!(detect_blockages(&empty, &p), Err(Error::EmptyTrace)));
    }

    #[test]
    fn matches_brute_force_on_random_traces() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let w = rng.random_range(1..40);
            let t = random_trace(&mut rng, w);
            let tau = rng.random_range(0.0..10.0);
            for mode in [
                DetectorMode::Attenuation,
                DetectorMode::Deviation,
                DetectorMode::Elevation,
            ] {
                let p = DetectorParams::new(tau, mode, 1.0, w).unwrap();
                assert_eq!(
                    detect_blockages(&t, &p).unwrap().bits(),
                    oracle(&t, tau, mode, w).as_slice()
                );
            }
        }
    }

    proptest! {
        #[test]
        fn higher_tau_blocks_subset(seed in any::<u64>(), t1 in 0.0f64..10.0, dt in 0.0f64..5.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t = random_trace(&mut rng, 30);
            for mode in [DetectorMode::Attenuation, DetectorMode::Deviation, DetectorMode::Elevation] {
                let lo = detect_blockages(&t, &DetectorParams::new(t1, mode, 1.0, 30).unwrap()).unwrap();
                let hi = detect_blockages(&t, &DetectorParams::new(t1 + dt, mode, 1.0, 30).unwrap()).unwrap();
                prop_assert!(hi.is_subset_of(&lo));
                prop_assert_eq!(lo.len(), 30);
            }
        }

        #[test]
        fn constant_offset_is_invisible(seed in any::<u64>(), shift in -20i32..20) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t = random_trace(&mut rng, 30);
            let moved = t.shifted(shift as f64);
            for mode in [DetectorMode::Attenuation, DetectorMode::Deviation, DetectorMode::Elevation] {
                let p = DetectorParams::new(3.0, mode, 1.0, 30).unwrap();
                prop_assert_eq!(detect_blockages(&t, &p).unwrap(), detect_blockages(&moved, &p).unwrap());
            }
        }
    }
}
