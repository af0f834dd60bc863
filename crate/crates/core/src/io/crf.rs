//! Response-curve tables as CSV.

use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::calibration::{ResponseCurve, DEFAULT_ANCHOR, LEVELS};
use crate::error::{Error, Result};
use crate::image::CHANNELS;

pub const CRF_HEADER: &str = "z,g_r,g_g,g_b";

/// 17 significant digits per value, so parsing restores every bit.
pub fn format_crf(crf: &ResponseCurve) -> String {
    let mut s = String::with_capacity(LEVELS * 80);
    s.push_str(CRF_HEADER);
    s.push('\n');
    for z in 0..LEVELS {
        s.push_str(&z.to_string());
        for c in 0..CHANNELS {
            s.push_str(&format!(",{:.16e}", crf.g(z, c)));
        }
        s.push('\n');
    }
    s
}

/// Anchor: level 128 if its row is zero, otherwise the first all-zero row.
pub fn parse_crf(text: &str) -> Result<ResponseCurve> {
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().unwrap_or("");
    if header.trim_end() != CRF_HEADER {
        return Err(Error::parse(0, format!("expected header {CRF_HEADER:?}")));
    }
    offset += header.len() as u64;
    let mut tables = [[0.0; LEVELS]; CHANNELS];
    let mut rows = 0;
    for line in lines {
        let here = offset;
        offset += line.len() as u64;
        let row = line.trim_end();
        if row.is_empty() {
            continue;
        }
        if rows == LEVELS {
            return Err(Error::parse(here, format!("more than {LEVELS} rows")));
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != CHANNELS + 1 {
            return Err(Error::parse(here, format!("expected 4 fields, got {}", fields.len())));
        }
        if fields[0].trim().parse::<usize>().ok() != Some(rows) {
            return Err(Error::parse(here, format!("expected z = {rows}, got {:?}", fields[0])));
        }
        for c in 0..CHANNELS {
            let v: f64 = fields[c + 1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(here, format!("bad number {:?}", fields[c + 1])))?;
            if !v.is_finite() {
                return Err(Error::parse(here, "non-finite value"));
            }
            tables[c][rows] = v;
        }
        rows += 1;
    }
    if rows != LEVELS {
        return Err(Error::parse(offset, format!("expected {LEVELS} rows, got {rows}")));
    }
    let zero_row = |z: usize| (0..CHANNELS).all(|c| tables[c][z] == 0.0);
    let anchor = if zero_row(DEFAULT_ANCHOR) {
        DEFAULT_ANCHOR
    } else {
        (0..LEVELS)
            .find(|&z| zero_row(z))
            .ok_or_else(|| Error::parse(offset, "no anchor row with g = 0"))?
    };
    ResponseCurve::new(tables, anchor)
}

pub fn write_crf(crf: &ResponseCurve, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format_crf(crf).as_bytes())
}

pub fn read_crf(path: impl AsRef<Path>) -> Result<ResponseCurve> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::parse(e.valid_up_to() as u64, "file is not UTF-8"))?;
    parse_crf(text)
}
