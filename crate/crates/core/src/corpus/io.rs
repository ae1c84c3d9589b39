use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One corpus item as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusRecord {
    pub id: String,
    pub features: Tensor,
    pub report: String,
    /// Ground-truth finding names, in lexicon order.
    pub labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct FeatureGrid {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Line {
    v: u32,
    id: String,
    features: FeatureGrid,
    report: String,
    labels: Vec<String>,
}

impl CorpusRecord {
    pub fn to_json(&self) -> String {
        let line = Line {
            v: SCHEMA_VERSION,
            id: self.id.clone(),
            features: FeatureGrid {
                shape: self.features.shape().to_vec(),
                values: self.features.data().to_vec(),
            },
            report: self.report.clone(),
            labels: self.labels.clone(),
        };
        serde_json::to_string(&line).expect("records serialize")
    }

    /// Parses one JSON line; `path` and `line_no` only label errors.
    pub fn from_json(text: &str, path: &str, line_no: usize) -> Result<CorpusRecord> {
        let line: Line = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        let schema = |message: String| Error::Schema {
            path: path.into(),
            line: line_no,
            message,
        };
        if line.v != SCHEMA_VERSION {
            return Err(schema(format!("unsupported schema version {}", line.v)));
        }
        let numel: usize = line.features.shape.iter().product();
        if line.features.shape.len() != 2 || numel != line.features.values.len() {
            return Err(schema(format!(
                "feature length {} does not match shape {:?}",
                line.features.values.len(),
                line.features.shape
            )));
        }
        if line.features.values.iter().any(|v| !v.is_finite()) {
            return Err(schema("non-finite feature value".into()));
        }
        if line.report.split_whitespace().next().is_none() {
            return Err(schema("empty report".into()));
        }
        let features = Tensor::new(line.features.shape, line.features.values).map_err(|e| schema(e.to_string()))?;
        Ok(CorpusRecord {
            id: line.id,
            features,
            report: line.report,
            labels: line.labels,
        })
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[CorpusRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json())?;
    }
    w.flush()
}

pub fn save_records(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let ctx = || path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    write_records(std::io::BufWriter::new(file), records).map_err(|e| Error::io(ctx(), e))
}

/// Reads a JSON-lines corpus; blank lines are skipped.
pub fn load_records(path: &Path) -> Result<Vec<CorpusRecord>> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(name.clone(), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(name.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(CorpusRecord::from_json(&line, &name, i + 1)?);
    }
    Ok(out)
}
