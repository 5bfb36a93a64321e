// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cell::{CellResult, QueryRecord};
use super::config::RunConfig;
use crate::chunking::ChunkMethod;
use crate::context::FillPolicy;
use crate::error::{Error, Result};
use crate::metrics::{paired_delta_ci, MetricSummary, NO_DIFFERENCE_BERTSCORE, NO_DIFFERENCE_EM};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const QUERIES_JSONL: &str = "queries.jsonl";
pub const PLOTDATA_JSON: &str = "plotdata.json";
pub const REPORT_JSON: &str = "report.json";
pub const DEFAULTS_MD: &str = "defaults.md";
pub const RUN_LOG: &str = "run.log";
pub const CELLS_JSONL: &str = "cells.jsonl";

pub const METRICS: [&str; 3] = ["em", "bert_f1", "none_ratio"];

/// Recommended settings for question answering over text documents.
pub const DEFAULTS_TABLE: [(&str, &str); 6] = [
    ("Overlap O", "0%"),
    ("Chunker", "Sentence"),
    ("Chunk size S", "150–300"),
    ("Context C (QA)", "~2.5k"),
    ("Context C (Summ.)", "~500"),
    ("When C>5k", "Consider Semantic"),
];

pub fn defaults_markdown() -> String {
    let mut s = String::from("| Choice | Default |\n|---|---|\n");
    for (choice, default) in DEFAULTS_TABLE {
        s.push_str(&format!("| {choice} | {default} |\n"));
    }
    s
}

/// How scoring treated special outcomes; copied into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringNotes {
    pub abstained_em: u8,
    pub abstained_bert_f1: f64,
    pub multi_gold_bert_f1: String,
    pub empty_context_in_denominators: bool,
    pub errors_in_denominators: bool,
}

impl Default for ScoringNotes {
    fn default() -> Self {
        Self {
            abstained_em: 0,
            abstained_bert_f1: 0.0,
            multi_gold_bert_f1: "max".into(),
            empty_context_in_denominators: true,
            errors_in_denominators: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapDelta {
    pub method: ChunkMethod,
    pub size: usize,
    pub budget: usize,
    pub overlap: f64,
    pub metric: String,
    /// Mean of (overlapped − no overlap) over questions scored in both cells.
    pub delta: MetricSummary,
    pub zero_in_interval: bool,
    pub no_measurable_difference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config_fingerprint: String,
    pub fill_policy: FillPolicy,
    pub generator: String,
    pub embedder: String,
    pub seed: u64,
    pub bootstrap_b: usize,
    pub level: f64,
    pub scoring: ScoringNotes,
    /// Cells in grid order.
    pub cells: Vec<CellResult>,
    pub overlap_deltas: Vec<OverlapDelta>,
    pub resumed_cells: usize,
    pub wall_ms: u64,
}

impl RunReport {
    pub fn methods(&self) -> Vec<ChunkMethod> {
        let mut seen = Vec::new();
        for c in &self.cells {
            if !seen.contains(&c.cell.method) {
                seen.push(c.cell.method);
            }
        }
        seen
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_ok()).count()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

fn metric<'a>(c: &'a CellResult, name: &str) -> Option<&'a MetricSummary> {
    match name {
        "em" => c.em.as_ref(),
        "bert_f1" => c.bert_f1.as_ref(),
        "none_ratio" => c.none_ratio.as_ref(),
        _ => None,
    }
}

fn per_question<'a>(c: &'a CellResult, name: &str) -> HashMap<&'a str, f64> {
    c.queries
        .iter()
        .filter(|q| q.outcome.is_scored())
        .map(|q| {
            let o = &q.outcome;
            let v = match name {
                "em" => o.em.unwrap_or(0) as f64,
                _ => o.bert_f1.unwrap_or(0.0),
            };
            (o.question_id.as_str(), v)
        })
        .collect()
}

/// Paired deltas between each overlapped cell and its zero-overlap twin.
pub fn overlap_deltas(cells: &[CellResult], b: usize, level: f64, seed: u64) -> Vec<OverlapDelta> {
    let mut out = Vec::new();
    let twin = |c: &RunConfig| {
        cells.iter().find(|o| {
            o.is_ok()
                && o.cell.method == c.method
                && o.cell.size == c.size
                && o.cell.budget == c.budget
                && o.cell.overlap == 0.0
        })
    };
    for cell in cells.iter().filter(|c| c.is_ok() && c.cell.overlap > 0.0) {
        let Some(base) = twin(&cell.cell) else {
            continue;
        };
        for (name, threshold) in [
            ("em", NO_DIFFERENCE_EM),
            ("bert_f1", NO_DIFFERENCE_BERTSCORE),
        ] {
            let a = per_question(cell, name);
            let z = per_question(base, name);
            let ids: Vec<&str> = base
                .queries
                .iter()
                .map(|q| q.outcome.question_id.as_str())
                .filter(|id| a.contains_key(id) && z.contains_key(id))
                .collect();
            if ids.is_empty() {
                continue;
            }
            let va: Vec<f64> = ids.iter().map(|id| a[id]).collect();
            let vb: Vec<f64> = ids.iter().map(|id| z[id]).collect();
            if let Ok(d) = paired_delta_ci(&va, &vb, b, level, seed) {
                out.push(OverlapDelta {
                    method: cell.cell.method,
                    size: cell.cell.size,
                    budget: cell.cell.budget,
                    overlap: cell.cell.overlap,
                    metric: name.to_string(),
                    no_measurable_difference: d.no_measurable_difference(threshold),
                    zero_in_interval: d.zero_in_interval,
                    delta: d.summary.named(format!("delta_{name}")),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
    PlotData,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 3] = [
        ExportFormat::Csv,
        ExportFormat::Jsonl,
        ExportFormat::PlotData,
    ];
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            "plotdata" => Ok(Self::PlotData),
            other => Err(Error::Config(format!("unknown export format {other:?}"))),
        }
    }
}

const CSV_HEADER: [&str; 28] = [
    "method",
    "size",
    "overlap",
    "budget",
    "policy",
    "n_total",
    "n_ok",
    "n_empty_context",
    "n_error",
    "chunk_count",
    "oversized_count",
    "index_terms",
    "index_postings",
    "index_bytes",
    "retrieval_depth",
    "mean_context_tokens",
    "skipped_total",
    "em_mean",
    "em_ci_low",
    "em_ci_high",
    "bert_f1_mean",
    "bert_f1_ci_low",
    "bert_f1_ci_high",
    "none_ratio_mean",
    "none_ratio_ci_low",
    "none_ratio_ci_high",
    "fingerprint",
    "error",
];

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn summary_fields(m: Option<&MetricSummary>) -> [String; 3] {
    match m {
        Some(m) => [f6(m.mean), f6(m.ci_low), f6(m.ci_high)],
        None => Default::default(),
    }
}

/// One row per cell. Wall-times are left out so repeated runs match byte for byte.
pub fn write_summary_csv(report: &RunReport, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Integrity(format!("csv write failed: {e}"));
    out.write_record(CSV_HEADER).map_err(err)?;
    for c in &report.cells {
        let s = &c.stats;
        let mut row = vec![
            c.cell.method.to_string(),
            c.cell.size.to_string(),
            format!("{:.2}", c.cell.overlap),
            c.cell.budget.to_string(),
            c.cell.fill_policy.to_string(),
            s.n_total.to_string(),
            s.n_ok.to_string(),
            s.n_empty_context.to_string(),
            s.n_error.to_string(),
            s.chunk_count.to_string(),
            s.oversized_count.to_string(),
            s.index_terms.to_string(),
            s.index_postings.to_string(),
            s.index_bytes.to_string(),
            s.retrieval_depth.to_string(),
            f6(s.mean_context_tokens),
            s.skipped_total.to_string(),
        ];
        for name in METRICS {
            row.extend(summary_fields(metric(c, name)));
        }
        row.push(c.fingerprint.clone());
        row.push(c.error.clone().unwrap_or_default());
        out.write_record(&row).map_err(err)?;
    }
    out.flush()
        .map_err(|e| Error::Integrity(format!("csv flush failed: {e}")))
}

#[derive(Serialize)]
struct QueryLine<'a> {
    cell: &'a str,
    method: ChunkMethod,
    size: usize,
    overlap: f64,
    budget: usize,
    #[serde(flatten)]
    record: &'a QueryRecord,
}

pub fn write_queries_jsonl(report: &RunReport, mut w: impl Write) -> std::io::Result<()> {
    for c in &report.cells {
        for q in &c.queries {
            let line = QueryLine {
                cell: &c.fingerprint,
                method: c.cell.method,
                size: c.cell.size,
                overlap: c.cell.overlap,
                budget: c.cell.budget,
                record: q,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub size: usize,
    pub overlap: f64,
    /// The x coordinate.
    pub budget: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub metric: String,
    pub method: ChunkMethod,
    pub points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub x: String,
    pub level: f64,
    pub series: Vec<PlotSeries>,
}

/// Series keyed by (metric, method); points ordered by size, overlap, budget.
pub fn plot_data(report: &RunReport) -> PlotData {
    let mut series = Vec::new();
    for name in METRICS {
        for method in report.methods() {
            let mut points: Vec<PlotPoint> = report
                .cells
                .iter()
                .filter(|c| c.cell.method == method)
                .filter_map(|c| {
                    metric(c, name).map(|m| PlotPoint {
                        size: c.cell.size,
                        overlap: c.cell.overlap,
                        budget: c.cell.budget,
                        mean: m.mean,
                        ci_low: m.ci_low,
                        ci_high: m.ci_high,
                        n: m.n,
                    })
                })
                .collect();
            points.sort_by(|a, b| {
                a.size
                    .cmp(&b.size)
                    .then(a.overlap.total_cmp(&b.overlap))
                    .then(a.budget.cmp(&b.budget))
            });
            series.push(PlotSeries {
                metric: name.to_string(),
                method,
                points,
            });
        }
    }
    PlotData {
        x: "budget".into(),
        level: report.level,
        series,
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, std::io::BufWriter<std::fs::File>)> {
    let path = dir.join(name);
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, std::io::BufWriter::new(f)))
}

/// Writes the requested formats plus `report.json` and `defaults.md`.
pub fn export_report(
    report: &RunReport,
    out_dir: &Path,
    formats: &[ExportFormat],
) -> Result<Vec<PathBuf>> {
    if report.cells.is_empty() {
        return Err(Error::domain("report has no cells"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for f in ExportFormat::ALL
        .into_iter()
        .filter(|f| formats.contains(f))
    {
        match f {
            ExportFormat::Csv => {
                let (path, mut w) = create(out_dir, SUMMARY_CSV)?;
                write_summary_csv(report, &mut w)?;
                w.flush().map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
            ExportFormat::Jsonl => {
                let (path, mut w) = create(out_dir, QUERIES_JSONL)?;
                write_queries_jsonl(report, &mut w)
                    .and_then(|_| w.flush())
                    .map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
            ExportFormat::PlotData => {
                let (path, mut w) = create(out_dir, PLOTDATA_JSON)?;
                serde_json::to_writer_pretty(&mut w, &plot_data(report))
                    .map_err(std::io::Error::from)
                    .and_then(|_| w.flush())
                    .map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
    }
    let (path, mut w) = create(out_dir, REPORT_JSON)?;
    serde_json::to_writer_pretty(&mut w, report)
        .map_err(std::io::Error::from)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&path, e))?;
    written.push(path);
    let path = out_dir.join(DEFAULTS_MD);
    std::fs::write(&path, defaults_markdown()).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_table_rows() {
        let md = defaults_markdown();
        assert!(md.contains("| Overlap O | 0% |"));
        assert!(md.contains("| Chunker | Sentence |"));
        assert!(md.contains("| Chunk size S | 150–300 |"));
        assert!(md.contains("| Context C (QA) | ~2.5k |"));
        assert!(md.contains("| Context C (Summ.) | ~500 |"));
        assert_eq!(md.lines().count(), 8);
    }

    #[test]
    fn format_parse() {
        assert_eq!(
            "plotdata".parse::<ExportFormat>().unwrap(),
            ExportFormat::PlotData
        );
        assert!("xml".parse::<ExportFormat>().is_err());
    }
}
