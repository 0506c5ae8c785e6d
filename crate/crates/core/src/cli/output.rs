use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

use super::spec::RunSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Num(_) | Cell::Missing => String::new(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self { headers: headers.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Render a table with its run spec.
///
/// CSV: `# spec: <json>` on the first line, then a header row, floats with 17
/// significant digits and empty fields for missing values. JSON: one object
/// `{"spec": .., "rows": [..]}` whose row keys are the CSV headers.
pub fn render(spec: &RunSpec, table: &Table, format: Format) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::Csv => {
            writeln!(out, "# spec: {}", serde_json::to_string(spec)?)?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&table.headers)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::csv))?;
            }
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        table.headers.iter().zip(row).map(|(h, c)| (h.to_string(), c.json())).collect();
                    Value::Object(obj)
                })
                .collect();
            let doc = serde_json::json!({ "spec": spec, "rows": rows });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

/// Write to `path`, or to stdout when there is none.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// Rows of a file written by [`render`], in either format, as JSON objects.
/// CSV fields that parse as numbers become numbers and empty fields become null.
pub fn read_rows(path: &Path) -> Result<Vec<Map<String, Value>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(&text)?;
        let rows = doc
            .get("rows")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Spec(format!("{} has no rows array", path.display())))?;
        return rows
            .iter()
            .map(|r| r.as_object().cloned().ok_or_else(|| Error::Spec(format!("{}: row is not an object", path.display()))))
            .collect();
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let obj: Map<String, Value> = headers
            .iter()
            .zip(record.iter())
            .map(|(h, f)| {
                let v = if f.is_empty() {
                    Value::Null
                } else if let Ok(i) = f.parse::<u64>() {
                    Value::from(i)
                } else if let Ok(x) = f.parse::<f64>() {
                    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
                } else {
                    Value::String(f.to_string())
                };
                (h.to_string(), v)
            })
            .collect();
        rows.push(obj);
    }
    Ok(rows)
}
