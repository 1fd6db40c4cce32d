//! Dataset loaders. Two formats are accepted:
//!
//! JSONL, one observation per line:
//! `{"x": [1.0, 2.0], "y": 3.5}` — numeric key (a bare number also works);
//! `{"key": "Location: Austin, Texas", "y": 385000.0}` — text key;
//! `"y"` may be a number, an array (multi-output), or absent (target files).
//! Rows with a `null` y, or any `null` output component, are treated as
//! missing observations and dropped.
//!
//! CSV with a header: input columns `x` (or `x1..xk`) or `key`, output
//! columns `y` (or `y1..yk`). Empty y cells mark missing rows. Out-of-arity
//! rows are rejected, never coerced.

use super::DataError;
use crate::process::TargetSet;
use crate::prompting::{Observation, ObservationKey, TrainingSet};
use serde::Deserialize;
use std::path::Path;

/// Parsed rows before conversion to a training or target set.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub rows: Vec<(ObservationKey, Option<Vec<f64>>)>,
}

#[derive(Debug, Deserialize)]
struct JsonRow {
    #[serde(default)]
    x: Option<serde_json::Value>,
    #[serde(default)]
    key: Option<String>,
    // double Option: outer = field presence, inner = null vs value, so a
    // row with "y": null reads as an explicitly missing observation
    #[serde(default, deserialize_with = "some_value")]
    y: Option<Option<serde_json::Value>>,
}

fn some_value<'de, D>(d: D) -> Result<Option<Option<serde_json::Value>>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    use serde::Deserialize as _;
    let v = serde_json::Value::deserialize(d)?;
    Ok(Some(if v.is_null() { None } else { Some(v) }))
}

fn numbers_from(value: &serde_json::Value) -> Option<Vec<f64>> {
    match value {
        serde_json::Value::Number(n) => Some(vec![n.as_f64()?]),
        serde_json::Value::Array(items) => items
            .iter()
            .map(|v| v.as_f64())
            .collect::<Option<Vec<f64>>>(),
        _ => None,
    }
}

/// `y` may be null (missing row) or contain nulls inside an array (also a
/// missing row); anything else non-numeric is an error.
enum OutputCell {
    Present(Vec<f64>),
    Missing,
}

fn outputs_from(value: &serde_json::Value) -> Result<OutputCell, String> {
    match value {
        serde_json::Value::Null => Ok(OutputCell::Missing),
        serde_json::Value::Number(n) => n
            .as_f64()
            .map(|v| OutputCell::Present(vec![v]))
            .ok_or_else(|| "non-finite y".to_string()),
        serde_json::Value::Array(items) => {
            if items.iter().any(|v| v.is_null()) {
                return Ok(OutputCell::Missing);
            }
            items
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| "non-numeric y element".to_string()))
                .collect::<Result<Vec<f64>, String>>()
                .map(OutputCell::Present)
        }
        other => Err(format!("y must be a number or array, got {}", other)),
    }
}

pub fn load_jsonl(path: &Path) -> Result<LoadedData, DataError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError::Io(format!("{}: {}", path.display(), e)))?;
    parse_jsonl(&text)
}

/// Parses JSONL observation rows from memory.
pub fn parse_jsonl(text: &str) -> Result<LoadedData, DataError> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(line).map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let key = match (&row.x, &row.key) {
            (Some(x), None) => ObservationKey::Numeric(numbers_from(x).ok_or_else(|| {
                DataError::Parse {
                    line: line_no,
                    message: "x must be a number or array of numbers".into(),
                }
            })?),
            (None, Some(k)) => ObservationKey::Text(k.clone()),
            _ => {
                return Err(DataError::Parse {
                    line: line_no,
                    message: "each row needs exactly one of \"x\" or \"key\"".into(),
                })
            }
        };
        let outputs = match &row.y {
            None => None,
            Some(None) => continue,
            Some(Some(v)) => match outputs_from(v).map_err(|message| DataError::Parse {
                line: line_no,
                message,
            })? {
                OutputCell::Present(values) => Some(values),
                OutputCell::Missing => continue,
            },
        };
        rows.push((key, outputs));
    }
    Ok(LoadedData { rows })
}

pub fn load_csv(path: &Path) -> Result<LoadedData, DataError> {
    let file = std::fs::File::open(path)
        .map_err(|e| DataError::Io(format!("{}: {}", path.display(), e)))?;
    parse_csv(file)
}

/// Parses CSV observation rows from any reader.
pub fn parse_csv<R: std::io::Read>(input: R) -> Result<LoadedData, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| DataError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();

    let mut key_column: Option<usize> = None;
    let mut x_columns: Vec<usize> = Vec::new();
    let mut y_columns: Vec<usize> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if name == "key" {
            key_column = Some(i);
        } else if name == "x" || (name.starts_with('x') && name[1..].parse::<u32>().is_ok()) {
            x_columns.push(i);
        } else if name == "y" || (name.starts_with('y') && name[1..].parse::<u32>().is_ok()) {
            y_columns.push(i);
        } else {
            return Err(DataError::SchemaMismatch(format!(
                "unrecognized column {:?}",
                name
            )));
        }
    }
    if key_column.is_some() && !x_columns.is_empty() {
        return Err(DataError::SchemaMismatch(
            "use either a key column or x columns, not both".into(),
        ));
    }
    if key_column.is_none() && x_columns.is_empty() {
        return Err(DataError::SchemaMismatch("no input columns found".into()));
    }

    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 2; // header is line 1
        let record = record.map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let key = if let Some(k) = key_column {
            ObservationKey::Text(record.get(k).unwrap_or("").to_string())
        } else {
            let mut dims = Vec::with_capacity(x_columns.len());
            for &c in &x_columns {
                let cell = record.get(c).unwrap_or("");
                dims.push(cell.parse::<f64>().map_err(|_| DataError::Parse {
                    line: line_no,
                    message: format!("unparseable x cell {:?}", cell),
                })?);
            }
            ObservationKey::Numeric(dims)
        };
        let mut outputs = Vec::with_capacity(y_columns.len());
        let mut missing = false;
        for &c in &y_columns {
            let cell = record.get(c).unwrap_or("");
            if cell.is_empty() {
                missing = true;
                break;
            }
            outputs.push(cell.parse::<f64>().map_err(|_| DataError::Parse {
                line: line_no,
                message: format!("unparseable y cell {:?}", cell),
            })?);
        }
        if missing {
            continue;
        }
        rows.push((
            key,
            if y_columns.is_empty() {
                None
            } else {
                Some(outputs)
            },
        ));
    }
    Ok(LoadedData { rows })
}

/// Dispatches on extension: `.csv` loads as CSV, anything else as JSONL.
pub fn load_dataset(path: &Path) -> Result<LoadedData, DataError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_csv(path),
        _ => load_jsonl(path),
    }
}

impl LoadedData {
    /// All rows must carry outputs of one arity.
    pub fn into_training_set(self) -> Result<TrainingSet, DataError> {
        let mut observations = Vec::with_capacity(self.rows.len());
        for (key, outputs) in self.rows {
            let values = outputs.ok_or_else(|| {
                DataError::SchemaMismatch("training rows need output values".into())
            })?;
            observations.push(Observation::new(key, values));
        }
        TrainingSet::new(observations, None)
            .map_err(|e| DataError::SchemaMismatch(e.to_string()))
    }

    /// Truths are kept only when every row has them; a mix is an error.
    pub fn into_target_set(self) -> Result<TargetSet, DataError> {
        let with_truth = self.rows.iter().filter(|(_, y)| y.is_some()).count();
        if with_truth != 0 && with_truth != self.rows.len() {
            return Err(DataError::SchemaMismatch(
                "target rows must either all have truths or none".into(),
            ));
        }
        let keys: Vec<ObservationKey> = self.rows.iter().map(|(k, _)| k.clone()).collect();
        let truths = if with_truth == 0 {
            None
        } else {
            let arity = self.rows[0].1.as_ref().map(|v| v.len()).unwrap_or(0);
            let mut t = Vec::with_capacity(self.rows.len());
            for (_, y) in &self.rows {
                let y = y.as_ref().unwrap();
                if y.len() != arity {
                    return Err(DataError::SchemaMismatch(
                        "target truths have mixed arities".into(),
                    ));
                }
                t.push(y.clone());
            }
            Some(t)
        };
        TargetSet::new(keys, truths).map_err(|e| DataError::SchemaMismatch(e.to_string()))
    }
}
