//! Result rows, aggregates, and their CSV/JSON serialization.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One recovered stream of one algorithm in one Monte Carlo run. Optional
/// fields are empty in the CSV when they do not apply (e.g. `tau` for
/// gradient descent) or when the run failed; `status` says which.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run: usize,
    pub seed: u64,
    pub scenario: String,
    pub algorithm: String,
    pub stream: usize,
    pub snr_db: f64,
    pub samples: usize,
    pub isi_db: Option<f64>,
    pub ncci_db: Option<f64>,
    pub ser: Option<f64>,
    /// Source the stream locked onto (dominant column).
    pub source: Option<usize>,
    /// Certified lower bound on the cost.
    pub tau: Option<f64>,
    /// Cost at the extracted equalizer.
    pub cost: Option<f64>,
    /// Cost at the best gain along the extracted equalizer direction.
    pub cost_refined: Option<f64>,
    pub solver_iters: usize,
    pub extraction_iters: usize,
    pub status: String,
    /// Zero when timing is disabled.
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean (zero for a single sample).
    pub stderr: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { n, mean, stderr })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub rows: usize,
    pub failed: usize,
    pub isi_db: Option<Stat>,
    /// ISI averaged in the linear domain, then converted to dB.
    pub isi_db_of_mean: Option<f64>,
    pub ncci_db: Option<Stat>,
    pub ser: Option<Stat>,
    pub tau: Option<Stat>,
    pub cost: Option<Stat>,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub runs: usize,
    pub algorithms: BTreeMap<String, AlgorithmSummary>,
}

/// `10 log10` of the mean of `10^(x/10)`: dB values averaged as powers, so
/// a few badly equalized runs dominate as they would in a linear average.
pub fn power_mean_db(values_db: &[f64]) -> Option<f64> {
    if values_db.is_empty() {
        return None;
    }
    let m = values_db.iter().map(|d| 10f64.powf(d / 10.0)).sum::<f64>() / values_db.len() as f64;
    Some(10.0 * m.log10())
}

/// Aggregates over every row with a value. `isi_db` is averaged in the dB
/// domain, `isi_db_of_mean` in the linear domain.
pub fn summarize(scenario: &str, runs: usize, rows: &[ResultRow]) -> Summary {
    let mut groups: BTreeMap<String, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.algorithm.clone()).or_default().push(r);
    }
    let algorithms = groups
        .into_iter()
        .map(|(name, rs)| {
            let col = |f: fn(&ResultRow) -> Option<f64>| Stat::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let summary = AlgorithmSummary {
                rows: rs.len(),
                failed: rs.iter().filter(|r| r.isi_db.is_none()).count(),
                isi_db: col(|r| r.isi_db),
                isi_db_of_mean: power_mean_db(&rs.iter().filter_map(|r| r.isi_db).collect::<Vec<_>>()),
                ncci_db: col(|r| r.ncci_db),
                ser: col(|r| r.ser),
                tau: col(|r| r.tau),
                cost: col(|r| r.cost),
                mean_wall_ms: rs.iter().map(|r| r.wall_ms).sum::<f64>() / rs.len() as f64,
            };
            (name, summary)
        })
        .collect();
    Summary {
        scenario: scenario.to_string(),
        runs,
        algorithms,
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Writes `rows` to `csv_path` and the summary next to it with a `.json`
/// extension; returns the summary path.
pub fn write_outputs(csv_path: &Path, rows: &[ResultRow], summary: &Summary) -> Result<std::path::PathBuf> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(rows, std::fs::File::create(csv_path)?)?;
    let json_path = csv_path.with_extension("json");
    let mut f = std::fs::File::create(&json_path)?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    writeln!(f)?;
    Ok(json_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_values() {
        assert!(Stat::of(&[]).is_none());
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.n, s.mean), (2, 2.0));
        assert!((s.stderr - 1.0).abs() < 1e-15);
        assert_eq!(Stat::of(&[5.0]).unwrap().stderr, 0.0);
    }
}
