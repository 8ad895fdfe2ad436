//! Demographic label tables.
//!
//! ```text
//! batch_id,image_id,gender,ethnicity
//! doctor-0,doctor-0/0.png,female,asian
//! ```
//!
//! Rows are grouped by `batch_id` in order of first appearance.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::batch::{Ethnicity, Gender, LabeledBatch, LabeledBatchSet, LabeledImage};
use crate::io::FormatError;

const COLUMNS: [&str; 4] = ["batch_id", "image_id", "gender", "ethnicity"];

pub fn parse_labels(text: &str) -> Result<LabeledBatchSet, FormatError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| FormatError::LabelRow {
        line: 1,
        message: e.to_string(),
    })?;
    let cols: Vec<&str> = header.iter().collect();
    if cols != COLUMNS {
        return Err(FormatError::LabelRow {
            line: 1,
            message: format!("expected header {}, got {}", COLUMNS.join(","), cols.join(",")),
        });
    }

    let mut set = LabeledBatchSet::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| FormatError::LabelRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| FormatError::LabelRow { line, message };
        let (batch_id, image_id) = (&record[0], &record[1]);
        if batch_id.is_empty() {
            return Err(bad("empty batch_id".into()));
        }
        let gender: Gender = record[2].parse().map_err(bad)?;
        let ethnicity: Ethnicity = record[3].parse().map_err(bad)?;
        let slot = *index.entry(batch_id.to_string()).or_insert_with(|| {
            set.batches.push(LabeledBatch {
                id: batch_id.to_string(),
                images: Vec::new(),
            });
            set.batches.len() - 1
        });
        set.batches[slot].images.push(LabeledImage {
            image_id: image_id.to_string(),
            gender,
            ethnicity,
        });
    }
    Ok(set)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabeledBatchSet, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_labels(&text)
}
