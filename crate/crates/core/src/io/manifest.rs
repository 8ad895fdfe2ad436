//! Batch manifests: which files make up which evaluation batch.
//!
//! ```json
//! {
//!   "batches": [
//!     { "id": "rose-0", "items": ["rose/0.png", "rose/1.png"],
//!       "prompt": "a rose", "strategy": "pooling_cap" }
//!   ]
//! }
//! ```
//!
//! Relative item paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::FormatError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestBatch {
    pub id: String,
    pub items: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub batches: Vec<ManifestBatch>,
}

impl BatchManifest {
    /// Structural checks that do not touch the filesystem.
    pub fn validate_structure(&self) -> Result<(), FormatError> {
        if self.batches.is_empty() {
            return Err(FormatError::EmptyManifest);
        }
        let mut seen = HashSet::new();
        let mut dupes: Vec<String> = self
            .batches
            .iter()
            .filter(|b| !seen.insert(b.id.as_str()))
            .map(|b| b.id.clone())
            .collect();
        dupes.dedup();
        if !dupes.is_empty() {
            return Err(FormatError::DuplicateBatchIds(dupes));
        }
        if let Some(b) = self.batches.iter().find(|b| b.items.is_empty()) {
            return Err(FormatError::EmptyManifestBatch(b.id.clone()));
        }
        Ok(())
    }

    pub fn missing_files(&self) -> Vec<PathBuf> {
        self.batches
            .iter()
            .flat_map(|b| &b.items)
            .filter(|p| !p.exists())
            .cloned()
            .collect()
    }

    fn resolve(&mut self, base: &Path) {
        for item in self.batches.iter_mut().flat_map(|b| b.items.iter_mut()) {
            if item.is_relative() {
                *item = base.join(&*item);
            }
        }
    }
}

pub fn parse_manifest(text: &str) -> Result<BatchManifest, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Json {
        what: "manifest",
        message: e.to_string(),
    })
}

/// Parses, resolves relative paths and checks that ids are unique and every
/// item exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<BatchManifest, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut manifest = parse_manifest(&text)?;
    manifest.validate_structure()?;
    manifest.resolve(path.parent().unwrap_or_else(|| Path::new(".")));
    let missing = manifest.missing_files();
    if !missing.is_empty() {
        return Err(FormatError::MissingFiles(missing));
    }
    Ok(manifest)
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &BatchManifest) -> Result<(), FormatError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialization is infallible");
    fs::write(path, text + "\n").map_err(|e| FormatError::io(path, e))
}
