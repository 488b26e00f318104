//! Series ingestion from CSV.
//!
//! Accepted shapes: one value column, or a leading time column followed by the
//! value column. A first row that does not parse as numbers is a header.

use std::io::Read;

use crate::CliError;

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

/// Reads a series from CSV text.
pub fn parse_series<R: Read>(reader: R) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Config(format!("malformed CSV at line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let cells: Vec<String> = rec.iter().map(str::to_string).collect();
        if cells.iter().all(|c| c.is_empty()) {
            continue;
        }
        rows.push((line, cells));
    }
    let Some((_, first)) = rows.first() else {
        return Err(CliError::Config("input contains no data".into()));
    };
    let width = first.len();
    if width == 0 || width > 2 {
        return Err(CliError::Config(format!(
            "expected one value column or a time column plus a value column, found {width} columns"
        )));
    }
    let header = first.iter().any(|c| parse_cell(c).is_none()) && {
        // A two-column row whose value cell parses is data with a time label.
        width == 1 || parse_cell(&first[1]).is_none()
    };
    let col = width - 1;
    let mut values = Vec::with_capacity(rows.len());
    for (line, cells) in rows.iter().skip(usize::from(header)) {
        if cells.len() != width {
            return Err(CliError::Config(format!(
                "malformed CSV at line {line}: expected {width} columns, found {}",
                cells.len()
            )));
        }
        let raw = &cells[col];
        let v = parse_cell(raw).ok_or_else(|| {
            CliError::Config(format!("malformed CSV at line {line}: `{raw}` is not a number"))
        })?;
        if !v.is_finite() {
            return Err(CliError::Config(format!(
                "non-finite value `{raw}` at line {line}"
            )));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Config("input contains no data rows".into()));
    }
    Ok(values)
}
