//! 8-bit images: binary PPM (bit-exact) and PNG.

use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::image::{LdrImage, Raster};

pub fn encode_ppm(img: &LdrImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

fn skip_space_and_comments(buf: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < buf.len() && buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < buf.len() && buf[pos] == b'#' {
            while pos < buf.len() && buf[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn header_number(buf: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    *pos = skip_space_and_comments(buf, *pos);
    let start = *pos;
    while *pos < buf.len() && buf[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&buf[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(start as u64, format!("expected {what}")))
}

pub fn decode_ppm(buf: &[u8]) -> Result<LdrImage> {
    if buf.len() < 2 || buf[0] != b'P' {
        return Err(Error::parse(0, "missing PPM magic"));
    }
    if buf[1] != b'6' {
        return Err(Error::UnsupportedFormat(format!(
            "PNM variant P{} (only binary P6 is supported)",
            buf[1] as char
        )));
    }
    let mut pos = 2;
    let w = header_number(buf, &mut pos, "width")?;
    let h = header_number(buf, &mut pos, "height")?;
    let maxval = header_number(buf, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("PPM maxval {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(Error::parse(pos as u64, "zero image dimension"));
    }
    if pos >= buf.len() || !buf[pos].is_ascii_whitespace() {
        return Err(Error::parse(pos as u64, "expected whitespace after maxval"));
    }
    pos += 1;
    let n = w * h * 3;
    if buf.len() - pos < n {
        return Err(Error::parse(buf.len() as u64, "truncated pixel data"));
    }
    LdrImage::new(w, h, buf[pos..pos + n].to_vec())
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Reads `.ppm` / `.pnm` or `.png` depending on the extension.
pub fn read_ldr(path: impl AsRef<Path>) -> Result<LdrImage> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "ppm" | "pnm" => decode_ppm(&read_bytes(path)?),
        "png" => {
            let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
            let img = reader
                .decode()
                .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
            match img.color() {
                ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {}
                other => {
                    return Err(Error::UnsupportedFormat(format!(
                        "{}: {other:?} (only 8-bit PNG is supported)",
                        path.display()
                    )))
                }
            }
            let rgb = img.into_rgb8();
            let (w, h) = rgb.dimensions();
            LdrImage::new(w as usize, h as usize, rgb.into_raw())
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: unknown image extension {other:?}",
            path.display()
        ))),
    }
}

pub fn write_ldr(img: &LdrImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "ppm" | "pnm" => write_bytes(path, &encode_ppm(img)),
        "png" => {
            let buf = image::RgbImage::from_raw(
                img.width() as u32,
                img.height() as u32,
                img.data().to_vec(),
            )
            .ok_or_else(|| Error::invalid("image buffer does not match its shape"))?;
            DynamicImage::ImageRgb8(buf)
                .save_with_format(path, ImageFormat::Png)
                .map_err(|e| match e {
                    image::ImageError::IoError(io) => Error::io(path, io),
                    other => Error::UnsupportedFormat(other.to_string()),
                })
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: unknown image extension {other:?}",
            path.display()
        ))),
    }
}
