//! CSV and JSON input/output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use hdls_core::Mat;
use serde::Serialize;

/// Malformed panel text, with a 1-based location where one applies.
#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

fn number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Reads a `p x n` panel: one series per row. A first row with non-numeric
/// cells is a header; a first column with non-numeric cells holds identifiers.
pub fn parse_panel(text: &str) -> Result<Mat<f64>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ParseError(format!("malformed CSV: {e}")))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    if rows.is_empty() {
        return Err(ParseError("empty input".into()));
    }
    let id_column = if rows.len() == 1 {
        number(&rows[0].1[0]).is_none()
    } else {
        rows[1..].iter().any(|(_, r)| number(&r[0]).is_none())
    };
    let skip = usize::from(id_column);
    let header = rows[0].1[skip..].iter().any(|c| number(c).is_none()) && rows.len() > 1;
    let data = &rows[usize::from(header)..];
    let width = data[0].1.len();
    if width <= skip {
        return Err(ParseError(format!("row at line {} has no values", data[0].0)));
    }
    let n = width - skip;
    let mut values = Vec::with_capacity(data.len() * n);
    for (line, row) in data {
        if row.len() != width {
            return Err(ParseError(format!(
                "ragged row at line {line}: {} fields, expected {width}",
                row.len()
            )));
        }
        for (col, cell) in row.iter().enumerate().skip(skip) {
            match number(cell) {
                Some(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(ParseError(format!(
                        "line {line}, column {}: '{cell}' is not a finite number",
                        col + 1
                    )))
                }
            }
        }
    }
    let p = data.len();
    let panel = Mat::from_fn(p, n, |i, t| values[i * n + t]);
    for i in 0..p {
        if (1..n).all(|t| panel[(i, t)] == panel[(i, 0)]) {
            log::warn!("series {} is constant", i + 1);
        }
    }
    Ok(panel)
}

pub fn ingest_csv(path: &Path) -> Result<Mat<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_panel(&text)
        .map_err(anyhow::Error::from)
        .with_context(|| format!("parsing {}", path.display()))
}

/// Writes a panel with shortest round-trip float formatting.
pub fn write_panel_csv(path: &Path, panel: &Mat<f64>) -> Result<()> {
    let mut out = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for i in 0..panel.nrows() {
        out.write_record((0..panel.ncols()).map(|t| panel[(i, t)].to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
