//! Delimited-text ingestion driven by a small per-dataset schema file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// A column addressed by header name or zero-based position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

/// Schema for one table, usually stored as TOML next to the data:
///
/// ```toml
/// name = "energy"
/// delimiter = ","
/// header = true
/// target = "Y1"
/// drop = ["Y2"]
/// columns = 10
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSchema {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "comma")]
    pub delimiter: String,
    #[serde(default = "yes")]
    pub header: bool,
    pub target: ColumnRef,
    /// Columns that are neither features nor the target.
    #[serde(default)]
    pub drop: Vec<ColumnRef>,
    /// Expected field count per row; inferred from the first row when absent.
    #[serde(default)]
    pub columns: Option<usize>,
    /// Expected data row count, checked after parsing when present.
    #[serde(default)]
    pub rows: Option<usize>,
}

fn comma() -> String {
    ",".into()
}

fn yes() -> bool {
    true
}

impl TableSchema {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("table schema: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn delimiter_byte(&self) -> Result<u8> {
        match self.delimiter.as_str() {
            "\\t" | "\t" | "tab" => Ok(b'\t'),
            d if d.len() == 1 => Ok(d.as_bytes()[0]),
            d => Err(Error::Config(format!("delimiter must be one byte, got `{d}`"))),
        }
    }
}

fn resolve(col: &ColumnRef, header: Option<&[String]>, width: usize) -> Result<usize> {
    let idx = match col {
        ColumnRef::Index(i) => *i,
        ColumnRef::Name(name) => header
            .and_then(|h| h.iter().position(|c| c.trim() == name))
            .ok_or_else(|| Error::format(format!("column `{name}` not found in header")))?,
    };
    if idx >= width {
        return Err(Error::format(format!("column index {idx} out of range for {width} fields")));
    }
    Ok(idx)
}

/// Parses a regression table from in-memory text. Row numbers in errors count data
/// rows from 1; the reported line includes the header.
pub fn parse_table(text: &str, schema: &TableSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .has_headers(schema.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Option<Vec<String>> = if schema.header {
        Some(
            reader
                .headers()
                .map_err(|e| Error::format(format!("header: {e}")))?
                .iter()
                .map(str::to_owned)
                .collect(),
        )
    } else {
        None
    };

    let mut width = schema.columns.or(header.as_ref().map(Vec::len));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let line = row + usize::from(schema.header);
        let record = record.map_err(|e| Error::format(format!("row {row} (line {line}): {e}")))?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::format(format!(
                "row {row} (line {line}): expected {w} fields, found {}",
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(w);
        for (c, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(Error::format(format!("row {row} (line {line}), column {c}: missing value")));
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::format(format!("row {row} (line {line}), column {c}: cannot parse `{field}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::format(format!("row {row} (line {line}), column {c}: non-finite value")));
            }
            values.push(v);
        }
        rows.push(values);
    }
    let width = width.ok_or_else(|| Error::format("table has no rows"))?;
    if rows.is_empty() {
        return Err(Error::format("table has no data rows"));
    }
    if let Some(expected) = schema.rows {
        if rows.len() != expected {
            return Err(Error::format(format!(
                "expected {expected} data rows, found {}",
                rows.len()
            )));
        }
    }

    let target = resolve(&schema.target, header.as_deref(), width)?;
    let mut skip = vec![false; width];
    skip[target] = true;
    for d in &schema.drop {
        skip[resolve(d, header.as_deref(), width)?] = true;
    }
    let features: Vec<usize> = (0..width).filter(|&c| !skip[c]).collect();
    if features.is_empty() {
        return Err(Error::format("schema leaves no feature columns"));
    }
    let x = Matrix::from_fn(rows.len(), features.len(), |i, j| rows[i][features[j]]);
    let y = rows.iter().map(|r| r[target]).collect();
    Dataset::regression(x, y)
}

pub fn load_table(path: &Path, schema: &TableSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, schema).map_err(|e| match e {
        Error::Format(msg) => Error::format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
