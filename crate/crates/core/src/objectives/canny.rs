//! Canny edge detector and the edge-map L1 loss.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::image::{luma_of, LdrImage, Raster, BT709};

pub const DEFAULT_SIGMA: f64 = 2.0;
pub const DEFAULT_LOW: f64 = 0.1;
pub const DEFAULT_HIGH: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    /// Hysteresis thresholds as fractions of the largest gradient magnitude.
    pub low: f64,
    pub high: f64,
    /// Grayscale conversion weights.
    pub gray_weights: [f64; 3],
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            low: DEFAULT_LOW,
            high: DEFAULT_HIGH,
            gray_weights: BT709,
        }
    }
}

/// Binary edge map, row-major, one byte per pixel holding 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid("edge map length does not match its shape"));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid("edge map values must be 0 or 1"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    k
}

fn blur(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let clampx = |x: isize| x.clamp(0, w as isize - 1) as usize;
    let clampy = |y: isize| y.clamp(0, h as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * plane[y * w + clampx(x as isize + t as isize - r)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * tmp[clampy(y as isize + t as isize - r) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Gaussian blur, central-difference gradients, four-direction non-maximum
/// suppression, then double-threshold hysteresis over 8-connected pixels.
pub fn canny(img: &LdrImage, params: &CannyParams) -> Result<EdgeMap> {
    let CannyParams {
        sigma, low, high, ..
    } = *params;
    if !(low > 0.0 && low < high && high <= 1.0) {
        return Err(Error::invalid(format!(
            "thresholds must satisfy 0 < low < high <= 1, got {low}, {high}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let (w, h) = (img.width(), img.height());
    let gray = luma_of(img, params.gray_weights);
    let smooth = blur(&gray, w, h, sigma);
    let at = |x: isize, y: isize| {
        smooth[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize]
    };

    let mut mag = vec![0.0; w * h];
    let mut dir = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y) - at(x - 1, y)) / 2.0;
            let gy = (at(x, y + 1) - at(x, y - 1)) / 2.0;
            let i = y as usize * w + x as usize;
            mag[i] = gx.hypot(gy);
            // quantize the gradient orientation to 0, 45, 90, 135 degrees
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            dir[i] = if !(22.5..157.5).contains(&angle) {
                0
            } else if angle < 67.5 {
                1
            } else if angle < 112.5 {
                2
            } else {
                3
            };
        }
    }

    let m = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let (dx, dy) = match dir[i] {
                0 => (1, 0),
                1 => (1, 1),
                2 => (0, 1),
                _ => (-1, 1),
            };
            let v = mag[i];
            // ties go to the pixel further along the gradient
            if v > 0.0 && v >= m(x - dx, y - dy) && v > m(x + dx, y + dy) {
                thin[i] = v;
            }
        }
    }

    let max = thin.iter().copied().fold(0.0, f64::max);
    let mut edges = vec![0u8; w * h];
    if max == 0.0 {
        return EdgeMap::new(w, h, edges);
    }
    let (lo, hi) = (low * max, high * max);
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, &v) in thin.iter().enumerate() {
        if v >= hi {
            edges[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if edges[j] == 0 && thin[j] >= lo {
                    edges[j] = 1;
                    queue.push_back(j);
                }
            }
        }
    }
    EdgeMap::new(w, h, edges)
}

/// Mean absolute difference between a predicted edge map and the Canny
/// edges of `target`.
pub fn edge_loss(pred_edges: &EdgeMap, target: &LdrImage, sigma: f64) -> Result<f64> {
    if pred_edges.width() != target.width() || pred_edges.height() != target.height() {
        return Err(Error::invalid("edge map and target differ in shape"));
    }
    let reference = canny(
        target,
        &CannyParams {
            sigma,
            ..Default::default()
        },
    )?;
    let diff = pred_edges
        .data()
        .iter()
        .zip(reference.data())
        .filter(|(a, b)| a != b)
        .count();
    Ok(diff as f64 / pred_edges.data().len() as f64)
}
