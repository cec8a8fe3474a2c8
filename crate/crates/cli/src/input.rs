//! Numeric CSV input.

use std::io::Read;

use crate::Failure;

/// Parses a comma-separated table of finite numbers. Every row must have the
/// same length; with `header` the first row is skipped.
pub fn read_csv<R: Read>(reader: R, header: bool) -> Result<Vec<Vec<f64>>, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => Failure::input(format!(
                "line {}: expected {expected_len} fields, found {len}",
                pos.as_ref().map_or(0, |p| p.line())
            )),
            _ => Failure::input(format!("malformed CSV: {e}")),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(Failure::input(format!(
                    "line {line}, column {}: {v} is not finite",
                    col + 1
                ))),
                Err(_) => Err(Failure::input(format!(
                    "line {line}, column {}: `{field}` is not a number",
                    col + 1
                ))),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::input("the input has no data rows"));
    }
    Ok(rows)
}

/// Writes rows in the format [`read_csv`] accepts, with shortest round-trip
/// float formatting.
pub fn write_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub(crate) fn read_csv_file(
    path: &std::path::Path,
    header: bool,
) -> Result<Vec<Vec<f64>>, Failure> {
    let file = std::fs::File::open(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    read_csv(file, header).map_err(|f| Failure::input(format!("{}: {}", path.display(), f.message)))
}
