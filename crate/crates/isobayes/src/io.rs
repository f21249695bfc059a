//! File formats: dataset CSV/JSON, prior and sweep configs (JSON or TOML by
//! extension), and JSON serialization of step functions and test results.
//!
//! Dataset CSV layout: a header `x1,...,xd,y` followed by one observation per
//! row. Parse failures carry 1-based data row numbers.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dataset, StepFunction};
use crate::posterior::PriorConfig;
use crate::simbench::{EstimationConfig, TestingConfig};

/// Parses a dataset from CSV text.
pub fn parse_dataset_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("bad CSV header: {e}")))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 2 {
        return Err(Error::Parse("header must list x1..xd and y".into()));
    }
    let d = cols.len() - 1;
    for (k, col) in cols.iter().take(d).enumerate() {
        let want = format!("x{}", k + 1);
        if *col != want {
            return Err(Error::Parse(format!("missing column '{want}', found '{col}'")));
        }
    }
    if cols[d] != "y" {
        return Err(Error::Parse(format!("missing column 'y', found '{}'", cols[d])));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        if record.len() != d + 1 {
            return Err(Error::Parse(format!(
                "row {row}: expected {} fields, found {}",
                d + 1,
                record.len()
            )));
        }
        let mut xi = Vec::with_capacity(d);
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}: '{field}' is not a number")))?;
            if k < d {
                xi.push(v);
            } else {
                y.push(v);
            }
        }
        x.push(xi);
    }
    Dataset::new(x, y)
}

/// Writes a dataset as CSV text in the same layout `parse_dataset_csv` reads.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let d = data.dim();
    let mut out: String = (1..=d).map(|k| format!("x{k},")).collect();
    out.push_str("y\n");
    for (row, y) in data.x().iter().zip(data.y()) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    out
}

/// Parses a dataset from JSON text: `{"x": [[...], ...], "y": [...]}`.
pub fn parse_dataset_json(text: &str) -> Result<Dataset> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Raw {
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    }
    let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad dataset JSON: {e}")))?;
    Dataset::new(raw.x, raw.y)
}

/// Reads a dataset, dispatching on the `.csv` / `.json` extension.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => parse_dataset_csv(&text),
        Some("json") => parse_dataset_json(&text),
        other => Err(Error::Parse(format!(
            "unsupported dataset extension {other:?}; expected .csv or .json"
        ))),
    }
}

/// Parses a prior config from JSON text. Unknown keys are errors.
pub fn parse_prior_json(text: &str) -> Result<PriorConfig> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad prior JSON: {e}")))
}

/// Parses a prior config from TOML text. Unknown keys are errors.
pub fn parse_prior_toml(text: &str) -> Result<PriorConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("bad prior TOML: {e}")))
}

/// Reads a prior config, dispatching on the `.json` / `.toml` extension.
pub fn read_prior(path: &Path) -> Result<PriorConfig> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_prior_json(&text),
        Some("toml") => parse_prior_toml(&text),
        other => Err(Error::Parse(format!(
            "unsupported prior extension {other:?}; expected .json or .toml"
        ))),
    }
}

/// Experiment sweep: estimation (error tables) or testing (rejection tables).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SweepConfig {
    Estimation(EstimationConfig),
    Testing(TestingConfig),
}

/// Parses a sweep config from JSON text.
pub fn parse_sweep_json(text: &str) -> Result<SweepConfig> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad sweep JSON: {e}")))
}

/// Parses a sweep config from TOML text.
pub fn parse_sweep_toml(text: &str) -> Result<SweepConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("bad sweep TOML: {e}")))
}

/// Reads a sweep config, dispatching on the `.json` / `.toml` extension.
pub fn read_sweep(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_sweep_json(&text),
        Some("toml") => parse_sweep_toml(&text),
        other => Err(Error::Parse(format!(
            "unsupported sweep extension {other:?}; expected .json or .toml"
        ))),
    }
}

/// Parses a step function from JSON text (grid plus flat row-major theta,
/// last axis fastest) and revalidates its shape.
pub fn parse_step_function_json(text: &str) -> Result<StepFunction> {
    let f: StepFunction =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad step-function JSON: {e}")))?;
    StepFunction::new(f.grid, f.theta)
}

/// Serializes any of the JSON-format artifacts.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads and parses a JSON artifact file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Writes a JSON artifact file, creating parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_json_pretty(value)? + "\n")?;
    Ok(())
}
