//! Iterations-to-target summaries over many run CSVs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::record::{read_csv, CsvRow};

/// Median and interquartile range over seeds; `None` entries never reached the target.
#[derive(Clone, Debug, PartialEq)]
pub struct Spread {
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
}

/// One (method, target) line of a summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub target: f64,
    pub runs: usize,
    pub reached: usize,
    pub normalized_iterations: Spread,
    /// Only present when the runs consumed generative-model samples.
    pub samples: Option<Spread>,
}

/// Method label of a record file: its stem without the trailing `_seed<N>`.
pub fn method_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match stem.rfind("_seed") {
        Some(i) if stem[i + 5..].chars().all(|c| c.is_ascii_digit()) && i + 5 < stem.len() => stem[..i].to_string(),
        _ => stem,
    }
}

/// First row whose gap is at most `target`.
pub fn first_reaching(rows: &[CsvRow], target: f64) -> Option<&CsvRow> {
    rows.iter().find(|r| r.gap <= target)
}

/// Linear-interpolation quantile of sorted values, where `INFINITY` stands for "unreached".
fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let (a, b) = (sorted[lo], sorted[hi]);
    if a.is_infinite() || b.is_infinite() {
        return if lo == hi || pos == lo as f64 { a.is_finite().then_some(a) } else { None };
    }
    Some(a + (pos - lo as f64) * (b - a))
}

fn spread(mut values: Vec<f64>) -> Spread {
    values.sort_by(f64::total_cmp);
    Spread { median: quantile(&values, 0.5), q1: quantile(&values, 0.25), q3: quantile(&values, 0.75) }
}

/// Summarize the record files matching `pattern` at each target gap.
pub fn summarize(pattern: &str, targets: &[f64]) -> Result<Vec<SummaryRow>> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::Config(format!("bad glob {pattern:?}: {e}")))?
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("cannot list {pattern:?}: {e}")))?;
    if paths.is_empty() {
        return Err(Error::Config(format!("no record files match {pattern:?}")));
    }
    summarize_files(&paths, targets)
}

/// Summarize explicit record files.
pub fn summarize_files(paths: &[PathBuf], targets: &[f64]) -> Result<Vec<SummaryRow>> {
    let mut by_method: BTreeMap<String, Vec<Vec<CsvRow>>> = BTreeMap::new();
    for path in paths {
        let file = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let rows = read_csv(file).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        by_method.entry(method_label(path)).or_default().push(rows);
    }
    let mut out = Vec::new();
    for (method, runs) in &by_method {
        let stochastic = runs.iter().flatten().any(|r| r.samples_used > 0);
        for &target in targets {
            let hits: Vec<Option<&CsvRow>> = runs.iter().map(|rows| first_reaching(rows, target)).collect();
            let iters = hits.iter().map(|h| h.map_or(f64::INFINITY, |r| r.normalized_iteration)).collect();
            let samples = stochastic
                .then(|| spread(hits.iter().map(|h| h.map_or(f64::INFINITY, |r| r.samples_used as f64)).collect()));
            out.push(SummaryRow {
                method: method.clone(),
                target,
                runs: runs.len(),
                reached: hits.iter().filter(|h| h.is_some()).count(),
                normalized_iterations: spread(iters),
                samples,
            });
        }
    }
    Ok(out)
}

/// Write a summary as CSV; unreached entries are written as `unreached`.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let cell = |x: Option<f64>| x.map_or_else(|| "unreached".to_string(), |v| v.to_string());
    let blank = |s: &Option<Spread>, f: fn(&Spread) -> Option<f64>| s.as_ref().map_or(String::new(), |s| cell(f(s)));
    w.write_record([
        "method",
        "target_gap",
        "runs",
        "reached",
        "median_normalized_iterations",
        "q1_normalized_iterations",
        "q3_normalized_iterations",
        "median_samples",
        "q1_samples",
        "q3_samples",
    ])
    .map_err(io)?;
    for r in rows {
        let it = &r.normalized_iterations;
        w.write_record([
            r.method.clone(),
            r.target.to_string(),
            r.runs.to_string(),
            r.reached.to_string(),
            cell(it.median),
            cell(it.q1),
            cell(it.q3),
            blank(&r.samples, |s| s.median),
            blank(&r.samples, |s| s.q1),
            blank(&r.samples, |s| s.q3),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a comma-separated list of positive target gaps.
pub fn parse_targets(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| Error::Config(format!("bad target gap {t:?}")))?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("target gap {v} must be positive")))
            }
        })
        .collect()
}
