//! Tabular reports of a design-space exploration.
//!
//! One row per grid cell, sorted by `(q, p, pruner)`. Grouping rows by
//! `(q, pruner)` gives the performance-vs-rate curves; `perf` against
//! `est_luts` gives the performance-vs-cost scatter. Floats are written in
//! shortest round-trip form, so JSON → CSV → JSON is lossless.

use esnq_core::dse::{sort_configs, DseResult};
use esnq_core::metrics::PerfKind;
use esnq_core::sensitivity::PrunerKind;
use serde::{Deserialize, Serialize};

use crate::config::ReportFormat;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub q: u32,
    pub p: f64,
    pub pruner: PrunerKind,
    pub perf_kind: Option<PerfKind>,
    pub perf: Option<f64>,
    pub base_perf: Option<f64>,
    pub nnz: Option<usize>,
    pub pruned: Option<usize>,
    pub est_luts: Option<u64>,
    pub n_adders: Option<u64>,
    pub n_comparators: Option<u64>,
    pub register_bits: Option<u64>,
    pub critical_path_levels: Option<u64>,
    pub error: Option<String>,
}

pub const COLUMNS: [&str; 15] = [
    "dataset",
    "q",
    "p",
    "pruner",
    "perf_kind",
    "perf",
    "base_perf",
    "nnz",
    "pruned",
    "est_luts",
    "n_adders",
    "n_comparators",
    "register_bits",
    "critical_path_levels",
    "error",
];

pub fn report_rows(result: &DseResult) -> Vec<ReportRow> {
    let mut configs = result.configs.clone();
    sort_configs(&mut configs);
    configs
        .iter()
        .map(|c| ReportRow {
            dataset: result.dataset.clone(),
            q: c.q,
            p: c.p,
            pruner: c.pruner,
            perf_kind: c.perf.or(c.base_perf).map(|x| x.kind),
            perf: c.perf.map(|x| x.value),
            base_perf: c.base_perf.map(|x| x.value),
            nnz: c.nnz,
            pruned: c.mask.as_ref().map(|m| m.pruned.len()),
            est_luts: c.cost.map(|k| k.est_luts),
            n_adders: c.cost.map(|k| k.n_adders),
            n_comparators: c.cost.map(|k| k.n_comparators),
            register_bits: c.cost.map(|k| k.register_bits),
            critical_path_levels: c.cost.map(|k| k.critical_path_levels),
            error: c.error.clone(),
        })
        .collect()
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("report CSV: {e}"))
}

/// CSV text; an empty report is a header-only document.
pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != COLUMNS {
        return Err(csv_err(format!("unexpected header {}", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn rows_to_json(rows: &[ReportRow]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(rows).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn rows_from_json(text: &str) -> Result<Vec<ReportRow>> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("report JSON: {e}")))
}

pub fn render(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => rows_to_csv(rows),
        ReportFormat::Json => rows_to_json(rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(q: u32, p: f64, perf: Option<f64>) -> ReportRow {
        ReportRow {
            dataset: "henon".into(),
            q,
            p,
            pruner: PrunerKind::Sensitivity,
            perf_kind: Some(PerfKind::Rmse),
            perf,
            base_perf: Some(0.1 + 0.2),
            nnz: Some(250),
            pruned: Some(0),
            est_luts: Some(12345),
            n_adders: Some(17),
            n_comparators: Some(255),
            register_bits: Some(400),
            critical_path_levels: Some(30),
            error: None,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let text = rows_to_csv(&[]).unwrap();
        assert_eq!(text, format!("{}\n", COLUMNS.join(",")));
        assert!(rows_from_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn json_csv_json_round_trip_is_exact() {
        let mut failed = row(8, 90.0, None);
        failed.error = Some("model has no surviving weights, \"quoted\"".into());
        failed.est_luts = None;
        let rows = vec![row(4, 15.0, Some(std::f64::consts::PI / 7.0)), row(4, 33.333333333333336, Some(1e-300)), failed];
        let json = rows_to_json(&rows).unwrap();
        let back = rows_from_csv(&rows_to_csv(&rows_from_json(&json).unwrap()).unwrap()).unwrap();
        assert_eq!(back, rows);
        assert_eq!(rows_to_json(&back).unwrap(), json);
    }

    #[test]
    fn unknown_format_lists_supported() {
        let e = ReportFormat::parse("xml").unwrap_err();
        assert!(e.to_string().contains("csv, json"));
    }
}
