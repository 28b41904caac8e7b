//! Line-delimited records and aligned text tables.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use labelboot::montecarlo::CellRecord;
use labelboot::{Method, MethodOutcome, TableReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One coefficient of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub method: Method,
    pub coef: String,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    /// Bootstrap replications; absent for the analytic methods.
    #[serde(rename = "B")]
    pub boot_reps: Option<usize>,
    pub seed: u64,
    pub alpha: f64,
    pub config_hash: String,
}

/// One method in one simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    #[serde(flatten)]
    pub cell: CellRecord,
    pub median_l3_t: Option<f64>,
    pub redraws: usize,
    pub config_hash: String,
}

pub fn estimate_records(
    outcomes: &[MethodOutcome],
    coef_names: &[String],
    n: usize,
    boot_reps: usize,
    seed: u64,
    alpha: f64,
    config_hash: &str,
) -> Vec<EstimateRecord> {
    outcomes
        .iter()
        .flat_map(|o| {
            coef_names
                .iter()
                .enumerate()
                .map(move |(j, name)| EstimateRecord {
                    method: o.method,
                    coef: name.clone(),
                    estimate: o.estimate[j],
                    ci_lo: o.ci[j].lo,
                    ci_hi: o.ci[j].hi,
                    n,
                    boot_reps: o.method.scheme().map(|_| boot_reps),
                    seed,
                    alpha,
                    config_hash: config_hash.to_string(),
                })
        })
        .collect()
}

pub fn sim_records(report: &TableReport, config_hash: &str) -> Vec<SimRecord> {
    let extras = report.cells.iter().flat_map(|c| c.methods.iter());
    report
        .records()
        .into_iter()
        .zip(extras)
        .map(|(cell, s)| SimRecord {
            cell,
            median_l3_t: s.median_l3_t,
            redraws: s.redraws,
            config_hash: config_hash.to_string(),
        })
        .collect()
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(contents.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Methods as rows; an estimate and interval column pair per coefficient.
pub fn estimate_table(
    outcomes: &[MethodOutcome],
    coef_names: &[String],
    shown: &[usize],
    preamble: &[String],
) -> String {
    let mut out = String::new();
    for line in preamble {
        let _ = writeln!(out, "{line}");
    }
    if !preamble.is_empty() {
        out.push('\n');
    }
    let width = outcomes
        .iter()
        .map(|o| o.method.title().len())
        .max()
        .unwrap_or(6)
        .max(6);
    let cells: Vec<Vec<(String, String)>> = outcomes
        .iter()
        .map(|o| {
            shown
                .iter()
                .map(|&j| {
                    (
                        format!("{:.3}", o.estimate[j]),
                        format!("[{:.3}, {:.3}]", o.ci[j].lo, o.ci[j].hi),
                    )
                })
                .collect()
        })
        .collect();
    let est_w = cells
        .iter()
        .flatten()
        .map(|c| c.0.len())
        .max()
        .unwrap_or(8)
        .max(8);
    let ci_w = cells
        .iter()
        .flatten()
        .map(|c| c.1.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let _ = write!(out, "{:<width$}", "");
    for &j in shown {
        let _ = write!(out, "  {:^w$}", coef_names[j], w = est_w + ci_w + 2);
    }
    out.push('\n');
    let _ = write!(out, "{:<width$}", "Method");
    for _ in shown {
        let _ = write!(out, "  {:>est_w$}  {:^ci_w$}", "Estimate", "95% CI");
    }
    out.push('\n');
    for (o, row) in outcomes.iter().zip(&cells) {
        let _ = write!(out, "{:<width$}", o.method.title());
        for (est, ci) in row {
            let _ = write!(out, "  {est:>est_w$}  {ci:>ci_w$}");
        }
        out.push('\n');
    }
    out
}
