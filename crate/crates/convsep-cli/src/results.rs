//! Result collection and emission: per-source score rows, per-configuration
//! summaries, and a machine-readable run manifest.
//!
//! dB values are clamped to +-300 when they enter the table (infinite ratios
//! become exactly 300), so the CSVs stay numeric and summaries computed from
//! a reloaded CSV reproduce the emitted ones exactly.

use crate::config::FileConfig;
use crate::error::{CliError, Result};
use convsep::metrics::{summarize, SummaryStats};
use convsep::model::Variant;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Serialization cap for infinite dB values.
pub const DB_CAP: f64 = 300.0;

pub fn cap_db(v: f64) -> f64 {
    v.clamp(-DB_CAP, DB_CAP)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mixture_id: usize,
    pub variant: Variant,
    pub k: usize,
    pub source: usize,
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: Variant,
    pub k: usize,
    pub metric: String,
    pub stats: SummaryStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitFailure {
    pub mixture_id: usize,
    pub variant: Variant,
    pub k: usize,
    pub error: String,
}

/// Seeds and draws behind one (mixture, variant, K) unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitRecord {
    pub mixture_id: usize,
    pub variant: Variant,
    pub k: usize,
    pub speakers: [String; 2],
    pub holdout: [usize; 2],
    pub train_seeds: [u64; 2],
    pub separation_seed: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub base_seed: u64,
    pub config: FileConfig,
    pub units: Vec<UnitRecord>,
    pub failures: Vec<UnitFailure>,
    pub wall_seconds_total: f64,
}

#[derive(Debug, Clone)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<SummaryRow>,
    pub manifest: RunManifest,
}

/// Per-(variant, K, metric) summaries over the capped rows, in a stable
/// order.
pub fn compute_summaries(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Variant, usize)> = rows.iter().map(|r| (r.variant, r.k)).collect();
    keys.sort_by_key(|(v, k)| (v.as_str(), *k));
    keys.dedup();
    let mut out = Vec::new();
    for (variant, k) in keys {
        let group: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.variant == variant && r.k == k)
            .collect();
        for (metric, pick) in [
            ("sdr", (|r: &ResultRow| r.sdr) as fn(&ResultRow) -> f64),
            ("sir", |r| r.sir),
            ("sar", |r| r.sar),
        ] {
            let values: Vec<f64> = group.iter().map(|r| pick(r)).collect();
            if let Ok(stats) = summarize(&values) {
                out.push(SummaryRow {
                    variant,
                    k,
                    metric: metric.to_string(),
                    stats,
                });
            }
        }
    }
    out
}

pub fn rows_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("mixture_id,variant,K,source,sdr_db,sir_db,sar_db\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.mixture_id,
            r.variant.as_str(),
            r.k,
            r.source,
            r.sdr,
            r.sir,
            r.sar
        )
        .expect("string write");
    }
    out
}

pub fn summary_csv(summaries: &[SummaryRow]) -> String {
    let mut out = String::from("variant,K,metric,count,q1,median,q3\n");
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.variant.as_str(),
            s.k,
            s.metric,
            s.stats.count,
            s.stats.q1,
            s.stats.median,
            s.stats.q3
        )
        .expect("string write");
    }
    out
}

/// Writes `results.csv`, `summary.csv`, and `run_manifest.json` to `out_dir`.
pub fn emit_results(table: &ResultsTable, out_dir: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(CliError::config("emit_results: empty results table"));
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("results.csv"), rows_csv(&table.rows))?;
    std::fs::write(out_dir.join("summary.csv"), summary_csv(&table.summaries))?;
    let manifest = serde_json::to_string_pretty(&table.manifest)
        .map_err(|e| CliError::data(format!("manifest serialization: {e}")))?;
    std::fs::write(out_dir.join("run_manifest.json"), manifest)?;
    Ok(())
}

/// Parses a `results.csv` back into rows.
pub fn load_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::data("empty results csv"))?;
    if header != "mixture_id,variant,K,source,sdr_db,sir_db,sar_db" {
        return Err(CliError::data(format!("unexpected csv header: {header}")));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::data(format!("csv line {} malformed", n + 2)));
        }
        let variant = match fields[1] {
            "ff" => Variant::Ff,
            "ccae" => Variant::Ccae,
            "rcae" => Variant::Rcae,
            other => return Err(CliError::data(format!("unknown variant {other}"))),
        };
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| CliError::data(format!("csv line {}: {e}", n + 2)))
        };
        rows.push(ResultRow {
            mixture_id: fields[0]
                .parse()
                .map_err(|e| CliError::data(format!("csv line {}: {e}", n + 2)))?,
            variant,
            k: fields[2]
                .parse()
                .map_err(|e| CliError::data(format!("csv line {}: {e}", n + 2)))?,
            source: fields[3]
                .parse()
                .map_err(|e| CliError::data(format!("csv line {}: {e}", n + 2)))?,
            sdr: parse(fields[4])?,
            sir: parse(fields[5])?,
            sar: parse(fields[6])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for mixture_id in 0..3 {
            for source in 0..2 {
                rows.push(ResultRow {
                    mixture_id,
                    variant: Variant::Ccae,
                    k: 20,
                    source,
                    sdr: cap_db(1.25 + mixture_id as f64),
                    sir: cap_db(f64::INFINITY),
                    sar: cap_db(-3.5),
                });
            }
        }
        rows
    }

    #[test]
    fn infinite_values_serialize_as_300() {
        let rows = sample_rows();
        let csv = rows_csv(&rows);
        assert!(csv.contains(",300,"), "{csv}");
        assert!(!csv.contains("inf"));
    }

    #[test]
    fn csv_reload_reproduces_rows_and_summaries() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sample_rows();
        let summaries = compute_summaries(&rows);
        std::fs::write(dir.path().join("results.csv"), rows_csv(&rows)).unwrap();
        let reloaded = load_rows(&dir.path().join("results.csv")).unwrap();
        assert_eq!(reloaded, rows);
        assert_eq!(compute_summaries(&reloaded), summaries);
    }

    #[test]
    fn summaries_group_by_variant_and_k() {
        let mut rows = sample_rows();
        rows.push(ResultRow {
            mixture_id: 0,
            variant: Variant::Ff,
            k: 10,
            source: 0,
            sdr: 2.0,
            sir: 3.0,
            sar: 4.0,
        });
        let summaries = compute_summaries(&rows);
        assert_eq!(summaries.len(), 6); // 2 groups x 3 metrics
        let ccae_sdr = summaries
            .iter()
            .find(|s| s.variant == Variant::Ccae && s.metric == "sdr")
            .unwrap();
        assert_eq!(ccae_sdr.stats.count, 6);
        assert_eq!(ccae_sdr.stats.median, 2.25);
    }
}
