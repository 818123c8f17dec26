//! Plain-text file formats and atomic file output.
//!
//! | file          | header               | body line                 |
//! |---------------|----------------------|---------------------------|
//! | crossing log  | `# duration_s=<f64>` | `<seconds>`               |
//! | RSS trace     | `# window_s=<f64>`   | `<seconds>,<dBm>`         |
//! | sequences     | none                 | `<label>,<bits>`          |
//! | provenance    | none                 | `<index>,<origin>,<detail>` |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{
    BlockageSequence, LabeledDataset, LabeledSample, Origin, RssReading, RssTrace,
};

/// Writes `bytes` to a temporary sibling file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("not a file path")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty body lines with their 1-based line numbers, plus the header
/// value of `# <key>=` if the first line carries it.
fn split_header<'a>(
    text: &'a str,
    key: &str,
    path: &Path,
) -> Result<(f64, Vec<(usize, &'a str)>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (n, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, format!("missing '# {key}=' header")))?;
    let value = first
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|h| h.strip_prefix(key))
        .and_then(|h| h.trim_start().strip_prefix('='))
        .ok_or_else(|| Error::parse(path, n, format!("expected header '# {key}=<seconds>'")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, n, format!("bad {key} value '{value}'")))?;
    let body = lines
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    Ok((value, body))
}

fn float(path: &Path, line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("not a number: '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("not finite: '{s}'")));
    }
    Ok(v)
}

/// Crossing timestamps and the duration of the recording.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingLog {
    pub duration: f64,
    pub times: Vec<f64>,
}

pub fn read_crossing_log(path: &Path) -> Result<CrossingLog> {
    let text = read(path)?;
    let (duration, body) = split_header(&text, "duration_s", path)?;
    let times = body
        .into_iter()
        .map(|(n, l)| float(path, n, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossingLog { duration, times })
}

pub fn write_crossing_log(path: &Path, log: &CrossingLog) -> Result<()> {
    let mut out = format!("# duration_s={}\n", log.duration);
    for t in &log.times {
        let _ = writeln!(out, "{t}");
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_rss_trace(path: &Path) -> Result<RssTrace> {
    let text = read(path)?;
    let (window, body) = split_header(&text, "window_s", path)?;
    let mut readings = Vec::with_capacity(body.len());
    for (n, l) in body {
        let (t, r) = l
            .split_once(',')
            .ok_or_else(|| Error::parse(path, n, "expected t_seconds,rss_dbm"))?;
        readings.push(RssReading {
            t: float(path, n, t)?,
            rss: float(path, n, r)?,
        });
    }
    RssTrace::new(readings, window).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn rss_trace_text(trace: &RssTrace) -> String {
    let mut out = format!("# window_s={}\n", trace.window_length());
    for r in trace.readings() {
        let _ = writeln!(out, "{},{}", r.t, r.rss);
    }
    out
}

pub fn write_rss_trace(path: &Path, trace: &RssTrace) -> Result<()> {
    atomic_write(path, rss_trace_text(trace).as_bytes())
}

/// Reads `<label>,<bits>` lines; all sequences must share one length.
pub fn read_sequences(path: &Path, slot_duration: f64) -> Result<Vec<(usize, BlockageSequence)>> {
    let text = read(path)?;
    let mut out: Vec<(usize, BlockageSequence)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, bits) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, n, "expected <label>,<bits>"))?;
        let label: usize = label
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, n, format!("bad label '{label}'")))?;
        let seq = BlockageSequence::parse_bitstring(bits.trim(), slot_duration)
            .ok_or_else(|| Error::parse(path, n, "bit string may only contain 0 and 1"))?;
        if seq.is_empty() {
            return Err(Error::parse(path, n, "empty bit string"));
        }
        if let Some((_, first)) = out.first() {
            if first.len() != seq.len() {
                return Err(Error::parse(
                    path,
                    n,
                    format!("length {} differs from {}", seq.len(), first.len()),
                ));
            }
        }
        out.push((label, seq));
    }
    Ok(out)
}

pub fn sequences_text<'a>(rows: impl IntoIterator<Item = (usize, &'a BlockageSequence)>) -> String {
    let mut out = String::new();
    for (label, seq) in rows {
        let _ = writeln!(out, "{label},{seq}");
    }
    out
}

pub fn write_sequences<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (usize, &'a BlockageSequence)>,
) -> Result<()> {
    atomic_write(path, sequences_text(rows).as_bytes())
}

/// Sidecar path holding provenance for a dataset file.
pub fn provenance_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".prov");
    PathBuf::from(name)
}

/// Offset of each class's first sample in the dataset order.
fn class_offsets(samples: &[LabeledSample]) -> Vec<(usize, usize)> {
    let mut firsts: Vec<(usize, usize)> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if !firsts.iter().any(|&(label, _)| label == s.label) {
            firsts.push((s.label, i));
        }
    }
    firsts
}

/// Provenance lines. Noised sources are given as dataset-wide indices.
pub fn provenance_text(ds: &LabeledDataset) -> String {
    let offsets = class_offsets(ds.samples());
    let base = |label: usize| {
        offsets
            .iter()
            .find(|&&(l, _)| l == label)
            .map_or(0, |&(_, i)| i)
    };
    let mut out = String::new();
    for (i, s) in ds.samples().iter().enumerate() {
        let detail = match &s.origin {
            Origin::Collected { original: Some(k) } => format!("original={k}"),
            Origin::Collected { original: None } => "original=-".to_string(),
            Origin::Superposed { constituents } => format!(
                "constituents={}",
                constituents
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("+")
            ),
            Origin::Noised { source, bit } => {
                format!("source={};bit={bit}", base(s.label) + source)
            }
        };
        let _ = writeln!(out, "{i},{},{detail}", s.origin.kind());
    }
    out
}

/// Writes the sequence file and its provenance sidecar.
pub fn write_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    write_sequences(path, ds.samples().iter().map(|s| (s.label, &s.sequence)))?;
    atomic_write(&provenance_path(path), provenance_text(ds).as_bytes())
}

fn parse_origin(path: &Path, n: usize, kind: &str, detail: &str, class_base: usize) -> Result<Origin> {
    let bad = || Error::parse(path, n, format!("bad provenance '{kind},{detail}'"));
    let field = |key: &str| -> Option<&str> {
        detail
            .split(';')
            .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    };
    match kind {
        "collected" => {
            let v = field("original").ok_or_else(bad)?;
            let original = if v == "-" {
                None
            } else {
                Some(v.parse().map_err(|_| bad())?)
            };
            Ok(Origin::Collected { original })
        }
        "superposed" => {
            let v = field("constituents").ok_or_else(bad)?;
            let constituents = if v.is_empty() {
                Vec::new()
            } else {
                v.split('+')
                    .map(|x| x.parse().map_err(|_| bad()))
                    .collect::<Result<Vec<usize>>>()?
            };
            Ok(Origin::Superposed { constituents })
        }
        "noised" => {
            let source: usize = field("source").ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let bit = field("bit").ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let source = source.checked_sub(class_base).ok_or_else(bad)?;
            Ok(Origin::Noised { source, bit })
        }
        _ => Err(bad()),
    }
}

/// Reads a dataset and its provenance sidecar. Classes are `0..=max label`.
pub fn read_dataset(path: &Path, slot_duration: f64) -> Result<LabeledDataset> {
    let rows = read_sequences(path, slot_duration)?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let prov_path = provenance_path(path);
    let prov = read(&prov_path)?;
    let prov_lines: Vec<(usize, &str)> = prov
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if prov_lines.len() != rows.len() {
        return Err(Error::parse(
            &prov_path,
            prov_lines.len(),
            format!("{} provenance lines for {} samples", prov_lines.len(), rows.len()),
        ));
    }
    let mut firsts: Vec<(usize, usize)> = Vec::new();
    let mut samples = Vec::with_capacity(rows.len());
    for (i, ((label, sequence), (n, line))) in rows.into_iter().zip(prov_lines).enumerate() {
        let mut parts = line.splitn(3, ',');
        let (idx, kind, detail) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(Error::parse(&prov_path, n, "expected index,origin,detail")),
        };
        if idx.parse::<usize>().ok() != Some(i) {
            return Err(Error::parse(&prov_path, n, format!("expected index {i}")));
        }
        let base = match firsts.iter().find(|&&(l, _)| l == label) {
            Some(&(_, b)) => b,
            None => {
                firsts.push((label, i));
                i
            }
        };
        let origin = parse_origin(&prov_path, n, kind, detail, base)?;
        samples.push(
            LabeledSample::new(sequence, label, origin)
                .map_err(|e| Error::parse(&prov_path, n, e.to_string()))?,
        );
    }
    let max_label = samples.iter().map(|s| s.label).max().unwrap_or(0);
    let w = samples[0].sequence.len();
    LabeledDataset::new(samples, max_label, w)
}

/// `value,epsilon` rows with a header.
pub fn sweep_csv(rows: &[(f64, usize)]) -> String {
    let mut out = String::from("value,epsilon\n");
    for (v, e) in rows {
        let _ = writeln!(out, "{v},{e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{build_dataset, SynthesisPlan};
    use proptest::prelude::*;

    #[test]
    fn crossing_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("walk.log");
        let log = CrossingLog {
            duration: 600.0,
            times: vec![0.25, 12.125, 599.9],
        };
        write_crossing_log(&p, &log).unwrap();
        assert_eq!(read_crossing_log(&p).unwrap(), log);
    }

    #[test]
    fn header_required() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.log");
        fs::write(&p, "1.0\n2.0\n").unwrap();
        let err = read_crossing_log(&p).unwrap_err();
        assert!(err.to_string().contains("duration_s"), "{err}");
        fs::write(&p, "# window_s=3\n0.5,-40\nzz,-41\n").unwrap();
        let err = read_rss_trace(&p).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn sequence_file_rejects_bad_bits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        fs::write(&p, "1,0102\n").unwrap();
        assert!(read_sequences(&p, 1.0).is_err());
        fs::write(&p, "1,010\n2,01\n").unwrap();
        assert!(read_sequences(&p, 1.0).is_err());
    }

    #[test]
    fn dataset_round_trip_with_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.txt");
        let originals: Vec<BlockageSequence> = (0..4)
            .map(|k| BlockageSequence::from_ones(8, &[k, k + 3], 1.0).unwrap())
            .collect();
        let ds = build_dataset(&originals, &SynthesisPlan::new(4, 3, 8, 3).unwrap()).unwrap();
        write_dataset(&p, &ds).unwrap();
        assert_eq!(read_dataset(&p, 1.0).unwrap(), ds);
        let prov = fs::read_to_string(provenance_path(&p)).unwrap();
        assert!(prov.starts_with("0,collected,original=-\n1,noised,source=0;bit=0\n"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rss_trace_text_is_lossless(
            raw in proptest::collection::vec((0.0f64..1.0, -100.0f64..0.0), 1..50),
        ) {
            let n = raw.len() as f64;
            let readings: Vec<RssReading> = raw
                .iter()
                .enumerate()
                .map(|(k, &(dt, rss))| RssReading { t: k as f64 + dt * 0.999, rss })
                .collect();
            let trace = RssTrace::new(readings, n).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("t.rss");
            write_rss_trace(&p, &trace).unwrap();
            prop_assert_eq!(read_rss_trace(&p).unwrap(), trace);
        }
    }
}
