//! File formats: Radiance RGBE, binary PPM / PNG, JSON stack manifests and
//! response-curve tables.

mod crf;
mod ldr;
mod manifest;
mod rgbe;

use std::path::Path;

pub use crf::{format_crf, parse_crf, read_crf, write_crf, CRF_HEADER};
pub use ldr::{decode_ppm, encode_ppm, read_ldr, write_ldr};
pub use manifest::{read_manifest, read_manifest_entries, write_manifest, ManifestEntry, StackManifest};
pub use rgbe::{decode_rgbe, encode_pixel, encode_rgbe, read_rgbe, write_rgbe};

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
