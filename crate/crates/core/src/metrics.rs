//! Counting-error metrics and the evaluation report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluated window: true and estimated head count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountPair {
    pub real: usize,
    pub estimated: usize,
}

impl CountPair {
    pub fn new(real: usize, estimated: usize) -> Self {
        Self { real, estimated }
    }

    /// Signed error `estimated - real`.
    pub fn error(&self) -> i64 {
        self.estimated as i64 - self.real as i64
    }

    pub fn abs_error(&self) -> usize {
        self.real.abs_diff(self.estimated)
    }
}

fn non_empty(pairs: &[CountPair]) -> Result<()> {
    if pairs.is_empty() {
        Err(Error::EmptyPairs)
    } else {
        Ok(())
    }
}

/// Sum of absolute differences between real and estimated counts.
pub fn absolute_counting_error(pairs: &[CountPair]) -> Result<usize> {
    non_empty(pairs)?;
    Ok(pairs.iter().map(CountPair::abs_error).sum())
}

/// Fraction of windows counted exactly.
pub fn exact_accuracy(pairs: &[CountPair]) -> Result<f64> {
    non_empty(pairs)?;
    let hits = pairs.iter().filter(|p| p.abs_error() == 0).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// `(k, fraction with |error| <= k)` for `k = 0..=max |error|`.
pub fn error_cdf(pairs: &[CountPair]) -> Result<Vec<(usize, f64)>> {
    non_empty(pairs)?;
    let max = pairs.iter().map(CountPair::abs_error).max().unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for p in pairs {
        hist[p.abs_error()] += 1;
    }
    let n = pairs.len() as f64;
    let mut acc = 0;
    Ok(hist
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            acc += c;
            (k, acc as f64 / n)
        })
        .collect())
}

/// Per-window results with aggregate error statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pairs: Vec<CountPair>,
    pub epsilon: usize,
    pub exact_accuracy: f64,
    pub cdf: Vec<(usize, f64)>,
}

impl EvalReport {
    pub fn from_pairs(pairs: Vec<CountPair>) -> Result<Self> {
        Ok(Self {
            epsilon: absolute_counting_error(&pairs)?,
            exact_accuracy: exact_accuracy(&pairs)?,
            cdf: error_cdf(&pairs)?,
            pairs,
        })
    }

    pub fn max_abs_error(&self) -> usize {
        self.pairs.iter().map(CountPair::abs_error).max().unwrap_or(0)
    }

    /// Fraction of windows with `|error| <= k`.
    pub fn within(&self, k: usize) -> f64 {
        // The CDF lists every bound from 0 to the maximum error.
        let last = self.cdf.len().saturating_sub(1);
        self.cdf.get(k.min(last)).map_or(0.0, |&(_, f)| f)
    }

    /// `real,estimated,error` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("real,estimated,error\n");
        for p in &self.pairs {
            let _ = writeln!(out, "{},{},{}", p.real, p.estimated, p.error());
        }
        out
    }

    /// Fixed-width table followed by the summary figures.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>6} {:>10} {:>6}", "real", "estimated", "error");
        for p in &self.pairs {
            let _ = writeln!(out, "{:>6} {:>10} {:>+6}", p.real, p.estimated, p.error());
        }
        let _ = writeln!(out, "windows: {}", self.pairs.len());
        let _ = writeln!(out, "absolute counting error: {}", self.epsilon);
        let _ = writeln!(out, "exact accuracy: {:.4}", self.exact_accuracy);
        for (k, f) in &self.cdf {
            let _ = writeln!(out, "|error| <= {k}: {f:.4}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(rows: &[(usize, usize)]) -> Vec<CountPair> {
        rows.iter().map(|&(r, e)| CountPair::new(r, e)).collect()
    }

    fn small_room() -> Vec<CountPair> {
        pairs(&[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4), (5, 4), (6, 4), (7, 8)])
    }

    fn large_hall() -> Vec<CountPair> {
        pairs(&[
            (0, 0),
            (1, 2),
            (2, 4),
            (3, 3),
            (4, 4),
            (5, 6),
            (6, 6),
            (7, 7),
            (8, 9),
            (9, 7),
            (10, 10),
        ])
    }

    #[test]
    fn reference_errors() {
        let r = EvalReport::from_pairs(small_room()).unwrap();
        assert_eq!(r.epsilon, 4);
        assert_eq!(r.max_abs_error(), 2);
        assert_eq!(r.exact_accuracy, 5.0 / 8.0);
        assert_eq!(r.cdf, vec![(0, 5.0 / 8.0), (1, 7.0 / 8.0), (2, 1.0)]);

        let r = EvalReport::from_pairs(large_hall()).unwrap();
        assert_eq!(r.epsilon, 7);
        assert_eq!(r.exact_accuracy, 6.0 / 11.0);
        assert_eq!(r.within(2), 1.0);
    }

    #[test]
    fn exact_single_pair() {
        let r = EvalReport::from_pairs(pairs(&[(3, 3)])).unwrap();
        assert_eq!(r.cdf, vec![(0, 1.0)]);
        assert_eq!(r.epsilon, 0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(absolute_counting_error(&[]), Err(Error::EmptyPairs)));
        assert!(error_cdf(&[]).is_err());
        assert!(exact_accuracy(&[]).is_err());
    }

    #[test]
    fn cdf_monotone_and_consistent() {
        let r = EvalReport::from_pairs(pairs(&[(0, 3), (2, 2), (5, 1), (1, 2)])).unwrap();
        assert!(r.cdf.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(r.cdf.last().unwrap().1, 1.0);
        let recomputed: usize = r.pairs.iter().map(|p| p.abs_error()).sum();
        assert_eq!(recomputed, r.epsilon);
        assert_eq!(r.within(3), 0.75);
        assert_eq!(r.within(10), 1.0);
    }

    #[test]
    fn csv_layout() {
        let r = EvalReport::from_pairs(pairs(&[(2, 1), (0, 0)])).unwrap();
        assert_eq!(r.to_csv(), "real,estimated,error\n2,1,-1\n0,0,0\n");
    }
}
