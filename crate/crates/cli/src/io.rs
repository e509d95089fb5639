//! CSV datasets, model files and output sinks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use npkdc::{FitModel, LabeledDataset};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Bumped whenever the model file layout changes.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Rows read from a CSV with header `x1..xd[,label]`.
pub struct CsvTable {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Option<Vec<String>>,
}

impl CsvTable {
    /// Maps label strings to classes in order of first appearance.
    pub fn into_dataset(self, path: &Path) -> Result<LabeledDataset> {
        let Some(raw) = self.labels else {
            return Err(CliError::data(path, "a `label` column is required"));
        };
        let mut names: Vec<String> = Vec::new();
        let labels = raw
            .iter()
            .map(|l| match names.iter().position(|n| n == l) {
                Some(i) => i,
                None => {
                    names.push(l.clone());
                    names.len() - 1
                }
            })
            .collect();
        Ok(LabeledDataset::new(self.dim, self.features, labels, names)?)
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let row_error = |line: u64, message: String| CliError::Row {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header = reader.headers().map_err(|e| row_error(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_label = names.last() == Some(&"label");
    let dim = names.len() - has_label as usize;
    if dim == 0 {
        return Err(row_error(1, "header has no feature columns".into()));
    }
    for (j, name) in names[..dim].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(row_error(1, format!("expected column `x{}`, found `{name}`", j + 1)));
        }
    }

    let mut features = Vec::new();
    let mut labels = has_label.then(Vec::new);
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            row_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(row_error(line, format!("expected {} fields, found {}", names.len(), record.len())));
        }
        for (j, field) in record.iter().take(dim).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| row_error(line, format!("column x{}: `{field}` is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(row_error(line, format!("column x{}: value is not finite", j + 1)));
            }
            features.push(v);
        }
        if let Some(labels) = labels.as_mut() {
            let label = record[dim].trim();
            if label.is_empty() {
                return Err(row_error(line, "empty label".into()));
            }
            labels.push(label.to_string());
        }
    }
    if features.is_empty() {
        return Err(CliError::data(path, "no data rows"));
    }
    Ok(CsvTable { dim, features, labels })
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    read_csv(path)?.into_dataset(path)
}

pub fn write_dataset(path: &Path, data: &LabeledDataset) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| CliError::data(path, e.to_string());
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for (row, &label) in data.rows().zip(data.labels()) {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(data.label_names()[label].clone());
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    model: FitModel,
}

pub fn write_model(out: &Output, model: &FitModel) -> Result<()> {
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        model: model.clone(),
    };
    out.write_json(&file)
}

pub fn read_model(path: &Path) -> Result<FitModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::data(path, format!("invalid model JSON: {e}")))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == MODEL_SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(CliError::data(
                path,
                format!("model schema version {v} is not supported (expected {MODEL_SCHEMA_VERSION})"),
            ))
        }
        None => return Err(CliError::data(path, "model file has no schema_version")),
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| CliError::data(path, format!("invalid model: {e}")))?;
    let model = file.model;
    if model.classes().iter().any(|c| c.samples.dim() != model.dim()) {
        return Err(CliError::data(path, "class samples disagree with the model dimension"));
    }
    Ok(model)
}

/// A file path, or standard output when absent.
pub struct Output(pub Option<PathBuf>);

impl Output {
    pub fn write_bytes(&self, bytes: &[u8]) -> Result<()> {
        match &self.0 {
            Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(bytes)
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::io("<stdout>", e))
            }
        }
    }

    pub fn write_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        self.write_bytes(text.as_bytes())
    }

    /// Writes rows as CSV; the first row is the header.
    pub fn write_csv(&self, rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.write_record(row).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        self.write_bytes(&bytes)
    }
}
