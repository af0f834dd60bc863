//! Separable Lanczos-3 resampling with edge clamping.

use crate::error::{Error, Result};
use crate::image::{quantize_value, HdrImage, LdrImage, Raster, CHANNELS};

/// Lanczos window half-width.
pub const LANCZOS_A: f64 = 3.0;

/// `sinc(x) * sinc(x / a)` on `|x| < a`, zero elsewhere. Exactly 1 at 0 and
/// exactly 0 at the other integers.
pub fn lanczos_kernel(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.abs() >= a || x.fract() == 0.0 {
        return 0.0;
    }
    let px = std::f64::consts::PI * x;
    a * px.sin() * (px / a).sin() / (px * px)
}

/// Normalized contributions of source indices to one output coordinate.
#[derive(Debug, Clone)]
pub(crate) struct Taps {
    pub(crate) weights: Vec<f64>,
    /// Source indices after edge clamping, parallel to `weights`.
    pub(crate) indices: Vec<usize>,
}

/// Weights for each of `out_len` outputs sampling a line of `in_len` inputs.
pub(crate) fn compute_taps(in_len: usize, out_len: usize) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    // widen the kernel when shrinking so it also acts as the low-pass filter
    let filter_scale = scale.max(1.0);
    let support = LANCZOS_A * filter_scale;
    (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale - 0.5;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let mut weights = Vec::new();
            let mut indices = Vec::new();
            for s in lo..=hi {
                let w = lanczos_kernel((s as f64 - center) / filter_scale, LANCZOS_A);
                if w != 0.0 {
                    weights.push(w);
                    indices.push(s.clamp(0, in_len as isize - 1) as usize);
                }
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            Taps {
                weights,
                indices,
            }
        })
        .collect()
}

/// Resample an interleaved RGB plane.
fn resize_samples(data: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let xt = compute_taps(w, out_w);
    let yt = compute_taps(h, out_h);

    let mut horiz = vec![0.0; out_w * h * CHANNELS];
    for y in 0..h {
        for (ox, taps) in xt.iter().enumerate() {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (wt, &sx) in taps.weights.iter().zip(&taps.indices) {
                    acc += wt * data[(y * w + sx) * CHANNELS + c];
                }
                horiz[(y * out_w + ox) * CHANNELS + c] = acc;
            }
        }
    }

    let mut out = vec![0.0; out_w * out_h * CHANNELS];
    for (oy, taps) in yt.iter().enumerate() {
        for ox in 0..out_w {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (wt, &sy) in taps.weights.iter().zip(&taps.indices) {
                    acc += wt * horiz[(sy * out_w + ox) * CHANNELS + c];
                }
                out[(oy * out_w + ox) * CHANNELS + c] = acc;
            }
        }
    }
    out
}

/// Image kinds that can be resampled.
pub trait Resizable: Raster + Sized {
    fn from_resampled(width: usize, height: usize, samples: Vec<f64>) -> Result<Self>;
}

impl Resizable for LdrImage {
    fn from_resampled(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        LdrImage::new(
            width,
            height,
            samples.into_iter().map(quantize_value).collect(),
        )
    }
}

impl Resizable for HdrImage {
    /// Negative lobes can undershoot below zero; those samples are clamped.
    fn from_resampled(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        HdrImage::new(
            width,
            height,
            samples.into_iter().map(|v| v.max(0.0)).collect(),
        )
    }
}

/// Lanczos-3 resize. LDR results are rounded half away from zero and clamped.
pub fn resize_lanczos<I: Resizable>(img: &I, out_w: usize, out_h: usize) -> Result<I> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!(
            "target size must be positive, got {out_w}x{out_h}"
        )));
    }
    let samples = resize_samples(&img.to_f64(), img.width(), img.height(), out_w, out_h);
    I::from_resampled(out_w, out_h, samples)
}
