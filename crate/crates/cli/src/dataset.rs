//! CSV ingestion and export.
//!
//! Files carry a header row and comma-separated cells. Numeric columns are
//! parsed as `f64`; categorical columns are one-hot expanded in place with
//! categories in sorted order, and an optional label column is mapped to
//! [`Label`] and removed from the features. The column layout discovered on
//! a training file is kept as a [`FeatureEncoding`] so later files are
//! encoded identically.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use ae1svm_core::data::{Label, LabeledDataset};
use ae1svm_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// Maps raw label cells to classes. Cells are compared after trimming.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub column: String,
    pub normal_values: Vec<String>,
    pub anomaly_values: Vec<String>,
}

impl Default for LabelSchema {
    fn default() -> Self {
        LabelSchema {
            column: DEFAULT_LABEL_COLUMN.to_string(),
            normal_values: vec!["1".to_string()],
            anomaly_values: vec!["-1".to_string()],
        }
    }
}

impl LabelSchema {
    pub fn parse(&self, cell: &str) -> Option<Label> {
        let cell = cell.trim();
        if self.normal_values.iter().any(|v| v == cell) {
            Some(Label::Normal)
        } else if self.anomaly_values.iter().any(|v| v == cell) {
            Some(Label::Anomaly)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvSchema {
    pub label: Option<LabelSchema>,
    pub categorical_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnEncoding {
    Numeric { name: String },
    Categorical { name: String, categories: Vec<String> },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name } | ColumnEncoding::Categorical { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnEncoding::Numeric { .. } => 1,
            ColumnEncoding::Categorical { categories, .. } => categories.len(),
        }
    }
}

/// Source-column layout of an encoded dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub label: Option<LabelSchema>,
    pub columns: Vec<ColumnEncoding>,
}

impl FeatureEncoding {
    /// All-numeric layout with the given column names.
    pub fn numeric(names: &[String], label: Option<LabelSchema>) -> Self {
        FeatureEncoding {
            label,
            columns: names
                .iter()
                .map(|n| ColumnEncoding::Numeric { name: n.clone() })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(ColumnEncoding::width).sum()
    }

    /// Names of the encoded feature columns; one-hot columns read `column=category`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for c in &self.columns {
            match c {
                ColumnEncoding::Numeric { name } => out.push(name.clone()),
                ColumnEncoding::Categorical { name, categories } => {
                    out.extend(categories.iter().map(|v| format!("{name}={v}")))
                }
            }
        }
        out
    }
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(CliError::data(path, "empty file: no header row"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec.map_err(|e| csv_error(path, e))?);
    }
    if rows.is_empty() {
        return Err(CliError::data(path, "empty file: no data rows"));
    }
    Ok(RawTable { header, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::data(path, format!("read failed: {e}")),
        _ => CliError::data(path, format!("malformed CSV: {e}")),
    }
}

fn column_index(path: &Path, header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::data(path, format!("column '{name}' not found in header")))
}

/// Reads a CSV file, discovering categories from its contents.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<(LabeledDataset, FeatureEncoding)> {
    let table = read_table(path)?;
    let label_col = schema.label.as_ref().and_then(|l| table.header.iter().position(|h| *h == l.column));
    let mut categorical = vec![false; table.header.len()];
    for name in &schema.categorical_columns {
        let idx = column_index(path, &table.header, name)?;
        if Some(idx) == label_col {
            return Err(CliError::Argument(format!("column '{name}' cannot be both label and categorical")));
        }
        categorical[idx] = true;
    }
    let mut columns = Vec::new();
    for (idx, name) in table.header.iter().enumerate() {
        if Some(idx) == label_col {
            continue;
        }
        if categorical[idx] {
            let categories: BTreeSet<String> = table.rows.iter().map(|r| r[idx].trim().to_string()).collect();
            columns.push(ColumnEncoding::Categorical {
                name: name.clone(),
                categories: categories.into_iter().collect(),
            });
        } else {
            columns.push(ColumnEncoding::Numeric { name: name.clone() });
        }
    }
    let encoding = FeatureEncoding {
        label: schema.label.clone(),
        columns,
    };
    let data = encode_table(path, &table, &encoding)?;
    Ok((data, encoding))
}

/// Reads a CSV file using a previously fitted layout. Unseen categories are
/// rejected. Labels are read only if the label column is present.
pub fn load_csv_with(path: &Path, encoding: &FeatureEncoding) -> Result<LabeledDataset> {
    let table = read_table(path)?;
    encode_table(path, &table, encoding)
}

fn encode_table(path: &Path, table: &RawTable, encoding: &FeatureEncoding) -> Result<LabeledDataset> {
    let sources: Vec<Option<usize>> = encoding
        .columns
        .iter()
        .map(|c| table.header.iter().position(|h| h == c.name()))
        .collect();
    let missing: Vec<&str> = encoding
        .columns
        .iter()
        .zip(&sources)
        .filter(|(_, s)| s.is_none())
        .map(|(c, _)| c.name())
        .collect();
    if !missing.is_empty() {
        let found = encoding.columns.len() - missing.len();
        return Err(CliError::data(
            path,
            format!(
                "feature width mismatch: expected {} source columns, found {found}; missing {}",
                encoding.columns.len(),
                missing.join(", ")
            ),
        ));
    }
    let sources: Vec<usize> = sources.into_iter().flatten().collect();
    let label_col = encoding
        .label
        .as_ref()
        .and_then(|l| table.header.iter().position(|h| *h == l.column).map(|i| (i, l)));

    let width = encoding.width();
    let mut values = Vec::with_capacity(table.rows.len() * width);
    let mut labels = label_col.map(|_| Vec::with_capacity(table.rows.len()));
    for (r, rec) in table.rows.iter().enumerate() {
        let line = r + 2;
        if rec.len() != table.header.len() {
            return Err(CliError::data(
                path,
                format!("line {line}: expected {} cells, found {}", table.header.len(), rec.len()),
            ));
        }
        for (col, &src) in encoding.columns.iter().zip(&sources) {
            let cell = rec[src].trim();
            match col {
                ColumnEncoding::Numeric { name } => {
                    let v: f64 = cell.parse().map_err(|_| {
                        CliError::data(path, format!("line {line}, column '{name}': cannot parse '{cell}' as a number"))
                    })?;
                    if !v.is_finite() {
                        return Err(CliError::data(path, format!("line {line}, column '{name}': non-finite value")));
                    }
                    values.push(v);
                }
                ColumnEncoding::Categorical { name, categories } => {
                    let hit = categories.iter().position(|c| c == cell).ok_or_else(|| {
                        CliError::data(path, format!("line {line}, column '{name}': unknown category '{cell}'"))
                    })?;
                    values.extend((0..categories.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                }
            }
        }
        if let (Some((idx, schema)), Some(labels)) = (label_col, labels.as_mut()) {
            let cell = &rec[idx];
            let label = schema.parse(cell).ok_or_else(|| {
                CliError::data(
                    path,
                    format!("line {line}, column '{}': unknown label value '{}'", schema.column, cell.trim()),
                )
            })?;
            labels.push(label);
        }
    }
    let features = Matrix::from_vec(table.rows.len(), width, values)?;
    Ok(LabeledDataset::new(features, labels, Some(encoding.feature_names()))?)
}

/// Reads only the label column of a file.
pub fn load_labels(path: &Path, schema: &LabelSchema) -> Result<Vec<Label>> {
    let table = read_table(path)?;
    let idx = column_index(path, &table.header, &schema.column)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(r, rec)| {
            let cell = rec.get(idx).unwrap_or("");
            schema.parse(cell).ok_or_else(|| {
                CliError::data(
                    path,
                    format!("line {}, column '{}': unknown label value '{}'", r + 2, schema.column, cell.trim()),
                )
            })
        })
        .collect()
}

/// Copies the header and the data rows at `indices` (in the given order) verbatim.
pub fn copy_rows(src: &Path, dst: &Path, indices: &[usize]) -> Result<()> {
    let table = read_table(src)?;
    let mut w = csv::Writer::from_path(dst).map_err(|e| csv_error(dst, e))?;
    w.write_record(&table.header).map_err(|e| csv_error(dst, e))?;
    for &i in indices {
        let rec = table
            .rows
            .get(i)
            .ok_or_else(|| CliError::Argument(format!("row {i} out of range for {} rows", table.rows.len())))?;
        w.write_record(rec).map_err(|e| csv_error(dst, e))?;
    }
    w.flush().map_err(|e| CliError::io(dst, e))
}

/// Default feature names `x1..xN`.
pub fn default_feature_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Writes features (shortest round-trip formatting) and, if present, a
/// trailing `label` column holding `1` or `-1`.
pub fn save_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    let names = data
        .feature_names()
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| default_feature_names(data.n_cols()));
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = names;
    if data.labels().is_some() {
        header.push(DEFAULT_LABEL_COLUMN.to_string());
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let mut cells: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in data.features().iter_rows().enumerate() {
        cells.clear();
        cells.extend(row.iter().map(|v| v.to_string()));
        if let Some(labels) = data.labels() {
            cells.push(labels[i].as_sign().to_string());
        }
        w.write_record(&cells).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}
