//! CSV and JSON emission.
//!
//! Numbers use Rust's shortest round-trip representation; failed cells are
//! empty CSV fields or JSON nulls. A CSV starts with one `#` line carrying the
//! engine version and config hash, then the header, then one row per grid
//! point in row-major order.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use super::config::Format;
use crate::spectra::{PointFailure, Provenance, SpectrumResult};

pub const HEADER_1D: [&str; 2] = ["omega_detuning", "s1"];
pub const HEADER_2D: [&str; 4] = ["omega1", "omega2", "s2", "g2"];

pub fn columns(result: &SpectrumResult) -> &'static [&'static str] {
    if result.grid.is_two_photon() {
        &HEADER_2D
    } else {
        &HEADER_1D
    }
}

/// Row-major table matching [`columns`].
pub fn rows(result: &SpectrumResult) -> Vec<Vec<Option<f64>>> {
    let grid = &result.grid;
    (0..grid.len())
        .map(|idx| {
            let point = grid.point(idx);
            let mut row: Vec<Option<f64>> = point.into_iter().map(Some).collect();
            if grid.is_two_photon() {
                row.push(result.s2.get(idx).copied().flatten());
                row.push(result.g2.get(idx).copied().flatten());
            } else {
                row.push(result.s1.get(idx).copied().flatten());
            }
            row
        })
        .collect()
}

fn number(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:?}"),
        None => String::new(),
    }
}

pub fn banner(provenance: &Provenance) -> String {
    format!(
        "sensor-spectra {} config-sha256={} method={} mode={}",
        provenance.engine_version,
        provenance.config_hash.as_deref().unwrap_or("none"),
        provenance.method,
        provenance.mode
    )
}

pub fn to_csv(result: &SpectrumResult) -> String {
    let mut out = format!("# {}\n{}\n", banner(&result.provenance), columns(result).join(","));
    for row in rows(result) {
        let fields: Vec<String> = row.into_iter().map(number).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub comment: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

/// Inverse of [`to_csv`].
pub fn parse_csv(text: &str) -> Result<CsvTable, String> {
    let mut comment = None;
    let mut lines = text.lines().filter(|l| {
        if let Some(c) = l.strip_prefix('#') {
            comment.get_or_insert_with(|| c.trim().to_string());
            false
        } else {
            true
        }
    });
    let header: Vec<String> = lines.next().ok_or("missing header")?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| if f.is_empty() { Ok(None) } else { f.parse::<f64>().map(Some) })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("row {}: {e}", k + 1))?;
        if row.len() != header.len() {
            return Err(format!("row {} has {} fields, header has {}", k + 1, row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok(CsvTable { comment, header, rows })
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    engine_version: &'a str,
    config_hash: Option<&'a str>,
    label: &'a str,
    columns: &'static [&'static str],
    rows: Vec<Vec<Option<f64>>>,
    failures: &'a [PointFailure],
    provenance: &'a Provenance,
}

pub fn to_json(result: &SpectrumResult, label: &str) -> String {
    let doc = JsonDocument {
        engine_version: &result.provenance.engine_version,
        config_hash: result.provenance.config_hash.as_deref(),
        label,
        columns: columns(result),
        rows: rows(result),
        failures: &result.failures,
        provenance: &result.provenance,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("spectrum results serialize");
    text.push('\n');
    text
}

pub fn render(result: &SpectrumResult, label: &str, format: Format) -> String {
    match format {
        Format::Csv => to_csv(result),
        Format::Json => to_json(result, label),
    }
}

pub fn emit_data(result: &SpectrumResult, label: &str, format: Format, path: &Path) -> io::Result<()> {
    fs::write(path, render(result, label, format))
}
