//! Forward merge `ln E = sum_j w(Z_j) (g(Z_j) - EV_j) / sum_j w(Z_j)` and its
//! adjoint with respect to every stack intensity.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ExposureStack, HdrImage, Raster, StackImage, CHANNELS};

use super::{LinearizedResponse, WeightFunction};

/// Merge coefficients `w_j / sum w` for one sample, falling back to uniform
/// coefficients when every exposure has zero weight.
#[inline]
fn coefficients(zs: &[f64], w: &WeightFunction, out: &mut [f64]) {
    let mut total = 0.0;
    for (o, &z) in out.iter_mut().zip(zs) {
        *o = w.at(z);
        total += *o;
    }
    if total > 0.0 {
        for o in out.iter_mut() {
            *o /= total;
        }
    } else {
        let u = 1.0 / zs.len() as f64;
        out.fill(u);
    }
}

#[inline]
pub(crate) fn merge_sample(
    zs: &[f64],
    evs: &[f64],
    lin: &LinearizedResponse,
    w: &WeightFunction,
    c: usize,
) -> f64 {
    let mut coef = [0.0; MAX_EXPOSURES];
    let coef = &mut coef[..zs.len()];
    coefficients(zs, w, coef);
    let mut acc = 0.0;
    for j in 0..zs.len() {
        acc += coef[j] * (lin.value(zs[j], c) - evs[j]);
    }
    acc
}

/// Longest stack the per-sample scratch buffers accept.
pub const MAX_EXPOSURES: usize = 64;

fn check_stack<I: StackImage>(stack: &ExposureStack<I>) -> Result<()> {
    if stack.len() > MAX_EXPOSURES {
        return Err(Error::invalid(format!(
            "at most {MAX_EXPOSURES} exposures supported, got {}",
            stack.len()
        )));
    }
    Ok(())
}

/// Gather intensities of sample `i` across the stack.
#[inline]
fn gather<I: StackImage>(stack: &ExposureStack<I>, i: usize, buf: &mut [f64]) {
    for (b, im) in buf.iter_mut().zip(stack.images()) {
        *b = im.value(i);
    }
}

/// Log radiance for every sample, in the interleaved image layout.
pub fn merge_log<I: StackImage>(
    stack: &ExposureStack<I>,
    lin: &LinearizedResponse,
    w: &WeightFunction,
) -> Result<Vec<f64>> {
    check_stack(stack)?;
    let p = stack.len();
    let evs = stack.evs();
    let mut out = vec![0.0; stack.samples_per_image()];
    out.par_chunks_mut(CHANNELS * 256)
        .enumerate()
        .for_each(|(chunk, dst)| {
            let mut zs = [0.0; MAX_EXPOSURES];
            let zs = &mut zs[..p];
            let base = chunk * CHANNELS * 256;
            for (k, d) in dst.iter_mut().enumerate() {
                let i = base + k;
                gather(stack, i, zs);
                *d = merge_sample(zs, evs, lin, w, i % CHANNELS);
            }
        });
    Ok(out)
}

/// Merge a stack into linear radiance.
pub fn merge<I: StackImage>(
    stack: &ExposureStack<I>,
    lin: &LinearizedResponse,
    w: &WeightFunction,
) -> Result<HdrImage> {
    let log = merge_log(stack, lin, w)?;
    let data: Vec<f64> = log.iter().map(|v| v.exp()).collect();
    HdrImage::new(stack.width(), stack.height(), data).map_err(|_| {
        Error::NumericalFailure("merged radiance overflowed or is not finite".into())
    })
}

/// `dL/dZ` for every image of a stack.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientImage {
    width: usize,
    height: usize,
    images: Vec<Vec<f64>>,
}

impl GradientImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn images(&self) -> &[Vec<f64>] {
        &self.images
    }

    pub fn image(&self, j: usize) -> &[f64] {
        &self.images[j]
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.images[j][i]
    }

    /// Euclidean norm over every entry.
    pub fn norm(&self) -> f64 {
        self.images
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Backward pass of [`merge_log`]: given `dL/d ln E` per sample, return
/// `dL/dZ_ij = dL/d ln E_i * (w_ij / sum_k w_ik) * g'(Z_ij)`.
///
/// Weights are held constant, which is exact because the tabulated weight is
/// flat on each open segment.
pub fn merge_backward<I: StackImage>(
    stack: &ExposureStack<I>,
    lin: &LinearizedResponse,
    w: &WeightFunction,
    upstream: &[f64],
) -> Result<GradientImage> {
    check_stack(stack)?;
    let n = stack.samples_per_image();
    if upstream.len() != n {
        return Err(Error::invalid(format!(
            "upstream gradient has {} entries, merged image has {n}",
            upstream.len()
        )));
    }
    let p = stack.len();
    // sample-major scratch, transposed into per-image planes afterwards
    let mut flat = vec![0.0; n * p];
    flat.par_chunks_mut(p * 256)
        .enumerate()
        .for_each(|(chunk, dst)| {
            let mut zs = [0.0; MAX_EXPOSURES];
            let mut coef = [0.0; MAX_EXPOSURES];
            let zs = &mut zs[..p];
            let coef = &mut coef[..p];
            let base = chunk * 256;
            for (k, d) in dst.chunks_mut(p).enumerate() {
                let i = base + k;
                let c = i % CHANNELS;
                gather(stack, i, zs);
                coefficients(zs, w, coef);
                for j in 0..p {
                    d[j] = upstream[i] * coef[j] * lin.slope(zs[j], c);
                }
            }
        });
    let images = (0..p)
        .map(|j| (0..n).map(|i| flat[i * p + j]).collect())
        .collect();
    Ok(GradientImage {
        width: stack.width(),
        height: stack.height(),
        images,
    })
}

/// Shape check for callers that pair a merged image with a stack.
pub(crate) fn check_same_shape<I: StackImage, R: Raster>(
    stack: &ExposureStack<I>,
    img: &R,
) -> Result<()> {
    if stack.width() != img.width() || stack.height() != img.height() {
        return Err(Error::invalid(format!(
            "stack is {}x{}, image is {}x{}",
            stack.width(),
            stack.height(),
            img.width(),
            img.height()
        )));
    }
    Ok(())
}
