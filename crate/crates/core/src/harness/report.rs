//! Report structure and CSV / JSON emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Format};
use super::regime::Target;
use crate::error::{Error, Result};
use crate::stats::{quantile, sorted, MomentSummary, TestVerdict};

/// Row data is dropped when the estimated text size exceeds this many bytes.
pub const ROW_BYTE_LIMIT: u64 = 100_000_000;
/// Estimated bytes per serialized value.
const BYTES_PER_FIELD: u64 = 24;
pub const MIN_BINS: usize = 20;
const MAX_BINS: usize = 1000;
pub const QQ_POINTS: usize = 99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub name: String,
    pub summary: MomentSummary,
}

/// A reported value with no pass/fail attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub column: String,
    pub bin_count: usize,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub replicates: usize,
    pub stream: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub regime_part: Option<String>,
    pub limit: Option<Target>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub rows_elided: bool,
    pub aggregates: Vec<Aggregate>,
    pub verdicts: Vec<TestVerdict>,
    pub observations: Vec<Observation>,
    pub histogram: Option<Histogram>,
    /// `(reference quantile, sample quantile)` pairs.
    pub qq: Vec<(f64, f64)>,
    pub provenance: Provenance,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn verdict(&self, name: &str) -> Option<&TestVerdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn observation(&self, name: &str) -> Option<f64> {
        self.observations.iter().find(|o| o.name == name).map(|o| o.value)
    }

    pub fn aggregate(&self, name: &str) -> Option<&MomentSummary> {
        self.aggregates.iter().find(|a| a.name == name).map(|a| &a.summary)
    }

    /// Content with the wall-clock field cleared, for reproducibility checks.
    pub fn without_wall_clock(&self) -> Report {
        Report {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Contract(format!("report serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Report> {
        serde_json::from_str(text).map_err(|e| Error::Contract(format!("report parse: {e}")))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        let w = |out: &mut String, s: std::fmt::Arguments<'_>| out.write_fmt(s).expect("writing to a String");
        w(&mut out, format_args!("replicate"));
        for c in &self.columns {
            w(&mut out, format_args!(",{c}"));
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            w(&mut out, format_args!("{i}"));
            for v in row {
                w(&mut out, format_args!(",{}", num(*v)));
            }
            out.push('\n');
        }
        for line in self.footer_lines()? {
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }

    /// Footer block, every line starting with `#`.
    pub fn footer_lines(&self) -> Result<Vec<String>> {
        let config = serde_json::to_string(&self.config).map_err(|e| Error::Contract(e.to_string()))?;
        let mut lines = vec![format!("# config,{config}")];
        if let Some(p) = &self.regime_part {
            lines.push(format!("# regime,{p}"));
        }
        if self.rows_elided {
            lines.push("# rows_elided,true".to_string());
        }
        for a in &self.aggregates {
            let s = &a.summary;
            lines.push(format!(
                "# aggregate,{},{},{},{},{},{},{},{}",
                a.name,
                s.count,
                num(s.mean),
                num(s.variance),
                num(s.skewness),
                num(s.kurtosis),
                num(s.se_mean),
                num(s.se_variance)
            ));
        }
        for v in &self.verdicts {
            lines.push(format!(
                "# verdict,{},{},{},{},{}",
                v.name,
                num(v.statistic),
                num(v.threshold),
                if v.pass { "pass" } else { "fail" },
                v.sample_size
            ));
        }
        for o in &self.observations {
            lines.push(format!("# observation,{},{}", o.name, num(o.value)));
        }
        lines.push(format!(
            "# provenance,seed={},replicates={},stream={}",
            self.provenance.master_seed, self.provenance.replicates, self.provenance.stream
        ));
        lines.push(format!("# wall_clock_seconds,{}", num(self.wall_clock_seconds)));
        Ok(lines)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn emit_report(report: &Report, format: Format, path: &Path) -> Result<()> {
    let text = report.render(format)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn should_elide(rows: usize, columns: usize) -> bool {
    rows as u64 * (columns as u64 + 1) * BYTES_PER_FIELD > ROW_BYTE_LIMIT
}

/// Freedman-Diaconis bins with at least [`MIN_BINS`] bins.
pub fn histogram(column: &str, values: &[f64]) -> Option<Histogram> {
    let xs = sorted(values.iter().copied().filter(|v| v.is_finite()).collect());
    if xs.is_empty() {
        return None;
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let iqr = quantile(&xs, 0.75) - quantile(&xs, 0.25);
    let fd = if iqr > 0.0 {
        let width = 2.0 * iqr / (xs.len() as f64).cbrt();
        ((hi - lo) / width).ceil() as usize
    } else {
        0
    };
    let bins = fd.clamp(MIN_BINS, MAX_BINS);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &x in &xs {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Some(Histogram {
        column: column.to_string(),
        bin_count: bins,
        edges,
        counts,
    })
}

/// QQ pairs at probabilities `i / (QQ_POINTS + 1)`.
pub fn qq_pairs(sample_sorted: &[f64], reference_quantile: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    if sample_sorted.is_empty() {
        return Vec::new();
    }
    (1..=QQ_POINTS)
        .map(|i| {
            let p = i as f64 / (QQ_POINTS + 1) as f64;
            (reference_quantile(p), quantile(sample_sorted, p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_floor_and_counts() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let h = histogram("x", &xs).unwrap();
        assert!(h.bin_count >= MIN_BINS);
        assert_eq!(h.counts.iter().sum::<u64>(), 1000);
        assert_eq!(h.edges.len(), h.bin_count + 1);
        let flat = histogram("x", &[3.0; 10]).unwrap();
        assert_eq!(flat.bin_count, MIN_BINS);
        assert!(histogram("x", &[]).is_none());
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn elision_rule() {
        assert!(!should_elide(10_000, 10));
        assert!(should_elide(10_000_000, 10));
    }
}
