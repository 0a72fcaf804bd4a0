//! Result tables: one CSV row per evaluated cell plus a JSON-lines mirror
//! carrying extra metadata.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CSV_HEADER: [&str; 11] = [
    "task",
    "encoder",
    "dim",
    "split",
    "n",
    "accuracy",
    "baseline",
    "bleu",
    "seed",
    "checkpoint_digest",
    "paper_reference",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Task name, with `:<control>` appended for control variants.
    pub task: String,
    pub encoder: String,
    pub dim: usize,
    pub split: String,
    pub n: usize,
    pub accuracy: f64,
    /// Majority-class accuracy on the same split.
    pub baseline: f64,
    pub bleu: Option<f64>,
    pub seed: u64,
    pub checkpoint_digest: String,
    /// Published accuracy for the same cell, when one exists. Static, not computed.
    pub paper_reference: Option<f64>,
    /// JSON-lines only.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, serde_json::Value>,
}

/// Published skip-thought accuracies (fractions) for the original and
/// permuted corpora. Only external sentence sets are matched.
pub fn paper_reference(task: &str, encoder: &str) -> Option<f64> {
    if encoder != "external" {
        return None;
    }
    match task {
        "length" => Some(0.821),
        "content" => Some(0.797),
        "order" => Some(0.811),
        "length:permuted" => Some(0.682),
        "content:permuted" => Some(0.764),
        "order:permuted" => Some(0.765),
        _ => None,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn jsonl_path(csv: &Path) -> PathBuf {
    csv.with_extension("jsonl")
}

/// Writes `path` as CSV and a `.jsonl` sibling, both in row order.
pub fn emit_report(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.task.clone(),
            r.encoder.clone(),
            r.dim.to_string(),
            r.split.clone(),
            r.n.to_string(),
            r.accuracy.to_string(),
            r.baseline.to_string(),
            opt(r.bleu),
            r.seed.to_string(),
            r.checkpoint_digest.clone(),
            opt(r.paper_reference),
        ])?;
    }
    w.flush()?;
    let mut j = BufWriter::new(File::create(jsonl_path(path))?);
    for r in rows {
        serde_json::to_writer(&mut j, r)?;
        j.write_all(b"\n")?;
    }
    j.flush()?;
    Ok(())
}

/// Parses a CSV written by [`emit_report`]; `meta` comes back empty.
pub fn read_report_csv<R: Read>(r: R) -> Result<Vec<ReportRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::data(format!("unexpected report header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |field: &str| Error::Parse { line, msg: format!("invalid {field}") };
        let num = |k: usize, f: &str| rec[k].parse::<f64>().map_err(|_| bad(f));
        let optnum = |k: usize, f: &str| {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                rec[k].parse::<f64>().map(Some).map_err(|_| bad(f))
            }
        };
        rows.push(ReportRow {
            task: rec[0].to_string(),
            encoder: rec[1].to_string(),
            dim: rec[2].parse().map_err(|_| bad("dim"))?,
            split: rec[3].to_string(),
            n: rec[4].parse().map_err(|_| bad("n"))?,
            accuracy: num(5, "accuracy")?,
            baseline: num(6, "baseline")?,
            bleu: optnum(7, "bleu")?,
            seed: rec[8].parse().map_err(|_| bad("seed"))?,
            checkpoint_digest: rec[9].to_string(),
            paper_reference: optnum(10, "paper_reference")?,
            meta: BTreeMap::new(),
        });
    }
    Ok(rows)
}
