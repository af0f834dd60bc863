//! JSON description of an exposure stack on disk.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_bytes, read_ldr, write_bytes};
use crate::error::{Error, Result};
use crate::image::{ExposureStack, ExposureUnit, LdrImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub ev: f64,
    pub unit: ExposureUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub entries: Vec<ManifestEntry>,
}

impl StackManifest {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Validation("manifest has no entries".into()));
        }
        if let Some(j) = self.entries.iter().position(|e| e.path.as_os_str().is_empty()) {
            return Err(Error::Validation(format!("entry {j} has an empty path")));
        }
        let evs: Vec<f64> = self
            .entries
            .iter()
            .map(|e| e.unit.to_natural_log(e.ev))
            .collect();
        if let Some(j) = evs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("entry {j} has a non-finite ev")));
        }
        if let Some(j) = evs.windows(2).position(|p| p[1] <= p[0]) {
            return Err(Error::Validation(format!(
                "exposure values must be strictly increasing: entry {} ({}) <= entry {j} ({})",
                j + 1,
                evs[j + 1],
                evs[j]
            )));
        }
        Ok(())
    }
}

/// Parses and validates a manifest without loading any images.
pub fn read_manifest_entries(path: impl AsRef<Path>) -> Result<StackManifest> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let manifest: StackManifest = serde_json::from_slice(&bytes).map_err(|e| {
        let offset = bytes
            .split_inclusive(|&b| b == b'\n')
            .take(e.line().saturating_sub(1))
            .map(|l| l.len())
            .sum::<usize>()
            + e.column().saturating_sub(1);
        Error::parse(offset as u64, format!("{}: {e}", path.display()))
    })?;
    manifest.validate()?;
    Ok(manifest)
}

/// Loads every image of a manifest; EVs come back in natural-log units.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<ExposureStack<LdrImage>> {
    let path = path.as_ref();
    let manifest = read_manifest_entries(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut images = Vec::with_capacity(manifest.entries.len());
    let mut evs = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        images.push(read_ldr(base.join(&e.path))?);
        evs.push(e.unit.to_natural_log(e.ev));
    }
    ExposureStack::new(images, evs, ExposureUnit::NaturalLog)
}

pub fn write_manifest(manifest: &StackManifest, path: impl AsRef<Path>) -> Result<()> {
    manifest.validate()?;
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::invalid(format!("cannot serialize manifest: {e}")))?;
    text.push('\n');
    write_bytes(path.as_ref(), text.as_bytes())
}
