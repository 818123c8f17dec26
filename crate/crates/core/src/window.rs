//! Time discretization: crossing timestamps to fixed-length slot sequences.

use crate::error::{Error, Result};
use crate::types::BlockageSequence;

/// Number of slots in a window of `window_seconds`, if it divides evenly.
pub fn slots_per_window(window_seconds: f64, slot_duration: f64) -> Result<usize> {
    if !(slot_duration.is_finite() && slot_duration > 0.0) {
        return Err(Error::Config(format!(
            "slot duration must be positive, got {slot_duration}"
        )));
    }
    if !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(Error::Config(format!(
            "window length must be positive, got {window_seconds}"
        )));
    }
    let ratio = window_seconds / slot_duration;
    let w = ratio.round();
    if w < 1.0 || (ratio - w).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Config(format!(
            "window of {window_seconds} s is not a whole number of {slot_duration} s slots"
        )));
    }
    Ok(w as usize)
}

/// Slot containing time `t`; slots are half-open `[i*d, (i+1)*d)`.
pub(crate) fn slot_index(t: f64, slot_duration: f64, w: usize) -> usize {
    // Rounding can push a time just below the window end onto index w.
    ((t / slot_duration).floor() as usize).min(w.saturating_sub(1))
}

/// Marks every slot that contains at least one crossing time.
pub fn timestamps_to_sequence(
    crossing_times: &[f64],
    w: usize,
    slot_duration: f64,
) -> Result<BlockageSequence> {
    let window = w as f64 * slot_duration;
    let mut bits = vec![false; w];
    for &t in crossing_times {
        if !(t >= 0.0 && t < window) {
            return Err(Error::TimestampOutOfRange { time: t, window });
        }
        bits[slot_index(t, slot_duration, w)] = true;
    }
    Ok(BlockageSequence::from_bits(bits, slot_duration))
}

/// Cuts a long crossing log into consecutive counting windows.
///
/// Window `k` covers `[k*L, (k+1)*L)` and its times are re-based to the
/// window start. A trailing partial window is dropped.
pub fn split_into_windows(
    crossing_times: &[f64],
    total_duration: f64,
    window_minutes: f64,
    slot_duration: f64,
) -> Result<Vec<BlockageSequence>> {
    let window = window_minutes * 60.0;
    let w = slots_per_window(window, slot_duration)?;
    if !(total_duration >= window) {
        return Err(Error::DurationTooShort {
            duration: total_duration,
            window,
        });
    }
    let count = (total_duration / window + 1e-9).floor() as usize;
    let covered = count as f64 * window;
    if total_duration - covered > 1e-9 * total_duration {
        log::warn!(
            "discarding trailing {:.3} s of a {total_duration} s log (not a whole window)",
            total_duration - covered
        );
    }

    let mut per_window: Vec<Vec<f64>> = vec![Vec::new(); count];
    for &t in crossing_times {
        if !(t >= 0.0 && t < total_duration) {
            return Err(Error::TimestampOutOfRange {
                time: t,
                window: total_duration,
            });
        }
        let k = (t / window).floor() as usize;
        if k >= count {
            continue;
        }
        let local = (t - k as f64 * window).clamp(0.0, window.next_down());
        per_window[k].push(local);
    }
    per_window
        .iter()
        .map(|times| timestamps_to_sequence(times, w, slot_duration))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_input_gives_zero_sequence() {
        let s = timestamps_to_sequence(&[], 300, 1.0).unwrap();
        assert_eq!(s.len(), 300);
        assert_eq!(s.popcount(), 0);
    }

    #[test]
    fn same_slot_crossings_collapse() {
        let s = timestamps_to_sequence(&[1.2, 1.8, 7.0], 10, 1.0).unwrap();
        assert_eq!(s.ones().collect::<Vec<_>>(), vec![1, 7]);
    }

    #[test]
    fn boundary_belongs_to_next_slot() {
        let s = timestamps_to_sequence(&[2.0], 4, 1.0).unwrap();
        assert_eq!(s.ones().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn out_of_range_names_timestamp() {
        let err = timestamps_to_sequence(&[3.0, 10.0], 10, 1.0).unwrap_err();
        match err {
            Error::TimestampOutOfRange { time, .. } => assert_eq!(time, 10.0),
            e => panic!("unexpected {e}"),
        }
        assert!(timestamps_to_sequence(&[-0.1], 10, 1.0).is_err());
    }

    #[test]
    fn hundred_minute_log_gives_twenty_windows() {
        let v = split_into_windows(&[], 6000.0, 5.0, 1.0).unwrap();
        assert_eq!(v.len(), 20);
        assert!(v.iter().all(|s| s.len() == 300));
    }

    #[test]
    fn empty_log_ten_minutes() {
        let v = split_into_windows(&[], 600.0, 5.0, 1.0).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|s| s.popcount() == 0));
    }

    #[test]
    fn crossing_rebased_into_second_window() {
        let v = split_into_windows(&[330.0], 600.0, 5.0, 1.0).unwrap();
        assert_eq!(v[0].popcount(), 0);
        assert_eq!(v[1].ones().collect::<Vec<_>>(), vec![30]);
    }

    #[test]
    fn trailing_partial_window_dropped() {
        let v = split_into_windows(&[650.0], 700.0, 5.0, 1.0).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|s| s.popcount() == 0));
    }

    #[test]
    fn short_log_is_an_error() {
        assert!(matches!(
            split_into_windows(&[], 200.0, 5.0, 1.0),
            Err(Error::DurationTooShort { .. })
        ));
    }

    #[test]
    fn uneven_slotting_rejected() {
        assert!(slots_per_window(300.0, 0.7).is_err());
        assert_eq!(slots_per_window(300.0, 0.5).unwrap(), 600);
    }

    /// Naive oracle: per full-log slot, scan every crossing.
    fn full_log_bits(times: &[f64], total_slots: usize) -> Vec<bool> {
        (0..total_slots)
            .map(|i| times.iter().any(|&t| t >= i as f64 && t < (i + 1) as f64))
            .collect()
    }

    #[test]
    fn hundred_minute_log_matches_naive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut times: Vec<f64> = (0..900).map(|_| rng.random_range(0.0..6000.0)).collect();
        times.sort_by(f64::total_cmp);
        let windows = split_into_windows(&times, 6000.0, 5.0, 1.0).unwrap();
        assert_eq!(windows.len(), 20);
        let concat: Vec<bool> = windows.iter().flat_map(|s| s.bits().to_vec()).collect();
        let oracle = full_log_bits(&times, 6000);
        assert_eq!(concat, oracle);

        let mut slots: Vec<u64> = times.iter().map(|t| t.floor() as u64).collect();
        slots.dedup();
        let total: usize = windows.iter().map(|s| s.popcount()).sum();
        assert_eq!(total, slots.len());
    }

    proptest! {
        #[test]
        fn duplicate_crossing_is_idempotent(
            times in proptest::collection::vec(0.0f64..60.0, 0..40),
            pick in any::<prop::sample::Index>(),
        ) {
            let a = timestamps_to_sequence(&times, 60, 1.0).unwrap();
            let mut dup = times.clone();
            if !times.is_empty() {
                dup.push(times[pick.index(times.len())]);
            }
            let b = timestamps_to_sequence(&dup, 60, 1.0).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn windows_concatenate_to_full_log(
            times in proptest::collection::vec(0.0f64..1200.0, 0..200),
        ) {
            let windows = split_into_windows(&times, 1200.0, 1.0, 1.0).unwrap();
            prop_assert_eq!(windows.len(), 20);
            for s in &windows {
                prop_assert_eq!(s.len(), 60);
            }
            let concat: Vec<bool> = windows.iter().flat_map(|s| s.bits().to_vec()).collect();
            prop_assert_eq!(concat, full_log_bits(&times, 1200));
        }
    }
}
