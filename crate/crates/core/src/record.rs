//! Per-iteration run records and their CSV encoding.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mdp::Policy;

/// Header of every run CSV.
pub const CSV_HEADER: [&str; 7] =
    ["k", "normalized_iteration", "gap", "eta", "updated_states", "samples_used", "elapsed_ns"];

/// State of a run after iteration `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    /// Number of completed iterations.
    pub k: u64,
    /// States updated in iteration `k`.
    pub updated_states: Vec<usize>,
    /// Stepsize used in iteration `k`.
    pub eta: f64,
    /// `f(π_k) − f(π*)`.
    pub gap: f64,
    /// `Σ_s V^{π_k}(s)`.
    pub value_checksum: f64,
    /// Total state-wise policy updates so far.
    pub cumulative_updates: u64,
    /// Total generative-model samples so far.
    pub samples_used: u64,
    /// Nanoseconds since the run started, or 0 when timing is off.
    pub elapsed_ns: u64,
}

/// A complete run: the initial gap, the records, and the final iterate.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub num_states: usize,
    pub initial_gap: f64,
    pub records: Vec<RunRecord>,
    pub final_policy: Policy,
    pub final_values: Vec<f64>,
    /// Mean gap of `π_0, …, π_{K−1}` accumulated over every iteration,
    /// whether or not it was recorded.
    pub mean_iterate_gap: Option<f64>,
}

impl RunOutput {
    /// Gap of the last iterate.
    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(self.initial_gap, |r| r.gap)
    }

    /// Gaps of `π_0, π_1, …` at the recorded iterations, starting with the initial gap.
    pub fn gaps(&self) -> Vec<f64> {
        std::iter::once(self.initial_gap).chain(self.records.iter().map(|r| r.gap)).collect()
    }

    /// `E[f(π_R) − f(π*)]` for `R` uniform on `{0, …, K−1}`, the average of
    /// the logged gaps of all iterates except the last.
    ///
    /// Uses [`RunOutput::mean_iterate_gap`] when the run tracked it; otherwise
    /// exact only when every iteration was recorded.
    pub fn random_iterate_gap(&self) -> f64 {
        if let Some(g) = self.mean_iterate_gap {
            return g;
        }
        let gaps = self.gaps();
        if gaps.len() == 1 {
            return gaps[0];
        }
        let body = &gaps[..gaps.len() - 1];
        body.iter().sum::<f64>() / body.len() as f64
    }

    /// First record whose gap is at most `target`.
    pub fn first_reaching(&self, target: f64) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.gap <= target)
    }

    /// Normalized iterations (updates / |S|) needed to reach `target`; zero if `π_0` already does.
    pub fn normalized_iterations_to(&self, target: f64) -> Option<f64> {
        if self.initial_gap <= target {
            return Some(0.0);
        }
        self.first_reaching(target).map(|r| r.cumulative_updates as f64 / self.num_states as f64)
    }

    /// Write the header, a `k = 0` row for `π_0`, then one row per record.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(io)?;
        w.write_record(["0", "0", &self.initial_gap.to_string(), "0", "", "0", "0"]).map_err(io)?;
        for r in &self.records {
            let states: Vec<String> = r.updated_states.iter().map(|s| s.to_string()).collect();
            w.write_record([
                r.k.to_string(),
                (r.cumulative_updates as f64 / self.num_states as f64).to_string(),
                r.gap.to_string(),
                r.eta.to_string(),
                states.join(";"),
                r.samples_used.to_string(),
                r.elapsed_ns.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One parsed CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub k: u64,
    pub normalized_iteration: f64,
    pub gap: f64,
    pub eta: f64,
    pub updated_states: Vec<usize>,
    pub samples_used: u64,
    pub elapsed_ns: u64,
}

/// Parse a run CSV, checking the header.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |msg: String| Error::Config(format!("malformed run CSV: {msg}"));
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| bad(format!("row {}: column {} is not a number", line + 2, CSV_HEADER[i])))
        };
        let int = |i: usize| -> Result<u64> {
            field(i).parse::<u64>().map_err(|_| bad(format!("row {}: column {} is not an integer", line + 2, CSV_HEADER[i])))
        };
        let states = if field(4).is_empty() {
            Vec::new()
        } else {
            field(4)
                .split(';')
                .map(|s| s.parse::<usize>().map_err(|_| bad(format!("row {}: bad state list", line + 2))))
                .collect::<Result<_>>()?
        };
        rows.push(CsvRow {
            k: int(0)?,
            normalized_iteration: num(1)?,
            gap: num(2)?,
            eta: num(3)?,
            updated_states: states,
            samples_used: int(5)?,
            elapsed_ns: int(6)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunOutput {
        let rec = |k: u64, gap: f64| RunRecord {
            k,
            updated_states: vec![k as usize, 3],
            eta: 0.5,
            gap,
            value_checksum: 0.0,
            cumulative_updates: 2 * k,
            samples_used: 0,
            elapsed_ns: 0,
        };
        RunOutput {
            num_states: 4,
            initial_gap: 1.0,
            records: vec![rec(1, 0.5), rec(2, 0.25)],
            final_policy: Policy::uniform(4, 2),
            final_values: vec![0.0; 4],
            mean_iterate_gap: None,
        }
    }

    #[test]
    fn csv_round_trip() {
        let run = sample();
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,normalized_iteration,gap,eta,updated_states,samples_used,elapsed_ns\n0,0,1,0,,0,0\n1,0.5,0.5,0.5,1;3,0,0\n"));
        let rows = read_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].updated_states, vec![2, 3]);
        assert_eq!(rows[2].normalized_iteration, 1.0);
    }

    #[test]
    fn random_iterate_gap_averages_all_but_last() {
        assert_eq!(sample().random_iterate_gap(), 0.75);
        assert_eq!(sample().normalized_iterations_to(0.3), Some(1.0));
        assert_eq!(sample().normalized_iterations_to(0.1), None);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
