//! Radiance `.hdr` (RGBE) reader and writer.

use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::image::{HdrImage, Raster};

const MIN_RLE_WIDTH: usize = 8;
const MAX_RLE_WIDTH: usize = 0x7fff;
const MIN_RUN: usize = 4;

/// Shared-exponent encoding of one RGB triple.
pub fn encode_pixel(rgb: [f64; 3]) -> Result<[u8; 4]> {
    let m = rgb[0].max(rgb[1]).max(rgb[2]);
    if m <= 1e-32 {
        return Ok([0; 4]);
    }
    // m = f * 2^e with f in [0.5, 1)
    let mut e = m.log2().floor() as i32 + 1;
    let f = m / 2f64.powi(e);
    if f >= 1.0 {
        e += 1;
    } else if f < 0.5 {
        e -= 1;
    }
    if e + 128 > 255 {
        return Err(Error::NumericalFailure(format!(
            "radiance {m} exceeds the RGBE range"
        )));
    }
    let scale = 2f64.powi(8 - e);
    let mant = |v: f64| (v * scale).floor().clamp(0.0, 255.0) as u8;
    Ok([mant(rgb[0]), mant(rgb[1]), mant(rgb[2]), (e + 128) as u8])
}

fn decode_pixel(p: [u8; 4]) -> [f64; 3] {
    if p[3] == 0 {
        return [0.0; 3];
    }
    let scale = 2f64.powi(i32::from(p[3]) - 136);
    // mid-point reconstruction; empty mantissas stay zero
    let v = |m: u8| if m == 0 { 0.0 } else { (f64::from(m) + 0.5) * scale };
    [v(p[0]), v(p[1]), v(p[2])]
}

fn write_rle_channel(out: &mut Vec<u8>, data: &[u8]) {
    let n = data.len();
    let mut cur = 0;
    while cur < n {
        let mut beg = cur;
        let mut run = 0;
        let mut old_run = 0;
        while run < MIN_RUN && beg < n {
            beg += run;
            old_run = run;
            run = 1;
            while beg + run < n && run < 127 && data[beg] == data[beg + run] {
                run += 1;
            }
        }
        // a short run right before the long one
        if old_run > 1 && old_run == beg - cur {
            out.push(128 + old_run as u8);
            out.push(data[cur]);
            cur = beg;
        }
        while cur < beg {
            let k = (beg - cur).min(128);
            out.push(k as u8);
            out.extend_from_slice(&data[cur..cur + k]);
            cur += k;
        }
        if run >= MIN_RUN {
            out.push(128 + run as u8);
            out.push(data[beg]);
            cur += run;
        }
    }
}

/// Complete `.hdr` file contents.
pub fn encode_rgbe(hdr: &HdrImage) -> Result<Vec<u8>> {
    let (w, h) = (hdr.width(), hdr.height());
    let mut out = format!("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {h} +X {w}\n").into_bytes();
    let d = hdr.data();
    let mut pixels = Vec::with_capacity(w * h);
    for i in 0..w * h {
        pixels.push(encode_pixel([d[3 * i], d[3 * i + 1], d[3 * i + 2]])?);
    }
    let rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&w);
    let mut channel = vec![0u8; w];
    for row in pixels.chunks(w) {
        if !rle {
            row.iter().for_each(|p| out.extend_from_slice(p));
            continue;
        }
        out.extend_from_slice(&[2, 2, (w >> 8) as u8, (w & 0xff) as u8]);
        for c in 0..4 {
            for (dst, p) in channel.iter_mut().zip(row) {
                *dst = p[c];
            }
            write_rle_channel(&mut out, &channel);
        }
    }
    Ok(out)
}

pub fn write_rgbe(hdr: &HdrImage, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_rgbe(hdr)?)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.pos as u64, msg)
    }

    fn line(&mut self) -> Result<&'a str> {
        let start = self.pos;
        let Some(k) = self.buf[start..].iter().position(|&b| b == b'\n') else {
            return Err(self.err("unterminated header line"));
        };
        self.pos = start + k + 1;
        std::str::from_utf8(&self.buf[start..start + k])
            .map_err(|_| Error::parse(start as u64, "header line is not UTF-8"))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.err("truncated scanline"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

fn read_header(cur: &mut Cursor<'_>) -> Result<(usize, usize)> {
    let first = cur.line()?;
    if !first.starts_with("#?") {
        return Err(Error::parse(0, "missing #? signature"));
    }
    loop {
        let at = cur.pos;
        let line = cur.line()?;
        if line.trim().is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(Error::UnsupportedFormat(format!(
                    "FORMAT={} at byte {at}",
                    fmt.trim()
                )));
            }
        }
    }
    let at = cur.pos as u64;
    let res = cur.line()?;
    let parts: Vec<&str> = res.split_whitespace().collect();
    match parts.as_slice() {
        ["-Y", h, "+X", w] => {
            let parse = |s: &str| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| Error::parse(at, format!("bad dimension {s:?}")))
            };
            Ok((parse(w)?, parse(h)?))
        }
        [a, _, b, _] if ["-Y", "+Y", "-X", "+X"].contains(a) && ["-Y", "+Y", "-X", "+X"].contains(b) => {
            Err(Error::UnsupportedFormat(format!("orientation {res:?}")))
        }
        _ => Err(Error::parse(at, format!("bad resolution line {res:?}"))),
    }
}

fn read_flat(cur: &mut Cursor<'_>, row: &mut [[u8; 4]], first: Option<[u8; 4]>) -> Result<()> {
    let w = row.len();
    let mut x = 0;
    let mut shift = 0;
    let mut pending = first;
    while x < w {
        let p: [u8; 4] = match pending.take() {
            Some(p) => p,
            None => cur.take(4)?.try_into().unwrap(),
        };
        if p[0] == 1 && p[1] == 1 && p[2] == 1 {
            // old-style run: repeat the previous pixel
            if x == 0 {
                return Err(cur.err("run at start of scanline"));
            }
            let count = usize::from(p[3]) << shift;
            if x + count > w {
                return Err(cur.err("run overflows scanline"));
            }
            let prev = row[x - 1];
            row[x..x + count].fill(prev);
            x += count;
            shift += 8;
        } else {
            row[x] = p;
            x += 1;
            shift = 0;
        }
    }
    Ok(())
}

fn read_rle(cur: &mut Cursor<'_>, row: &mut [[u8; 4]]) -> Result<()> {
    let w = row.len();
    for c in 0..4 {
        let mut x = 0;
        while x < w {
            let code = usize::from(cur.byte()?);
            if code > 128 {
                let n = code - 128;
                if x + n > w {
                    return Err(cur.err("run overflows scanline"));
                }
                let v = cur.byte()?;
                row[x..x + n].iter_mut().for_each(|p| p[c] = v);
                x += n;
            } else {
                if code == 0 || x + code > w {
                    return Err(cur.err("bad literal count"));
                }
                for (p, &v) in row[x..x + code].iter_mut().zip(cur.take(code)?) {
                    p[c] = v;
                }
                x += code;
            }
        }
    }
    Ok(())
}

pub fn decode_rgbe(bytes: &[u8]) -> Result<HdrImage> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let (w, h) = read_header(&mut cur)?;
    let mut data = Vec::with_capacity(w * h * 3);
    let mut row = vec![[0u8; 4]; w];
    for _ in 0..h {
        let at = cur.pos;
        let head: [u8; 4] = cur.take(4)?.try_into().unwrap();
        let new_rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&w)
            && head[0] == 2
            && head[1] == 2
            && head[2] & 0x80 == 0;
        if new_rle {
            let len = (usize::from(head[2]) << 8) | usize::from(head[3]);
            if len != w {
                return Err(Error::parse(
                    at as u64,
                    format!("scanline length {len} does not match width {w}"),
                ));
            }
            read_rle(&mut cur, &mut row)?;
        } else {
            read_flat(&mut cur, &mut row, Some(head))?;
        }
        for p in &row {
            data.extend_from_slice(&decode_pixel(*p));
        }
    }
    HdrImage::new(w, h, data)
}

pub fn read_rgbe(path: impl AsRef<Path>) -> Result<HdrImage> {
    decode_rgbe(&read_bytes(path.as_ref())?)
}
