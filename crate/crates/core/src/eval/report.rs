use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassScores, EvalError, PositionMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassRow {
    pub fn new(class: impl Into<String>, support: u64, scores: ClassScores) -> Self {
        Self {
            class: class.into(),
            support,
            precision: scores.precision,
            recall: scores.recall,
            f1: scores.f1,
        }
    }
}

/// One row per class.
pub fn write_class_csv(path: &Path, rows: &[ClassRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per grid cell: `row,col,queries,accuracy` (empty when no queries).
pub fn write_position_csv(path: &Path, map: &PositionMap) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "col", "queries", "accuracy"])?;
    for (r, row) in map.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            w.write_record([
                r.to_string(),
                c.to_string(),
                map.counts[r][c].to_string(),
                cell.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_summary_json<S: Serialize>(path: &Path, summary: &S) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
