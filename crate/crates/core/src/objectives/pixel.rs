//! Per-pixel losses: L1, intensity histograms, and the mu-law HDR loss.

use crate::calibration::LEVELS;
use crate::error::{Error, Result};
use crate::image::{HdrImage, LdrImage, Raster, RelaxedImage, CHANNELS};
use crate::synthesis::LogRadianceLoss;

pub const DEFAULT_MU: f64 = 5000.0;

fn check_shapes<A: Raster + ?Sized, B: Raster + ?Sized>(a: &A, b: &B) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "shape mismatch: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean absolute difference over every sample.
pub fn l1_loss<A: Raster + ?Sized, B: Raster + ?Sized>(pred: &A, target: &B) -> Result<f64> {
    check_shapes(pred, target)?;
    let n = pred.len();
    let total: f64 = (0..n).map(|i| (pred.value(i) - target.value(i)).abs()).sum();
    Ok(total / n as f64)
}

/// L1 loss and its gradient `sign(pred - target) / count` (zero at ties).
pub fn l1_loss_with_grad<A: Raster + ?Sized, B: Raster + ?Sized>(
    pred: &A,
    target: &B,
) -> Result<(f64, Vec<f64>)> {
    let loss = l1_loss(pred, target)?;
    let n = pred.len() as f64;
    let grad = (0..pred.len())
        .map(|i| sign(pred.value(i) - target.value(i)) / n)
        .collect();
    Ok((loss, grad))
}

/// L1 over a stack of exposures: mean over every sample of every image.
pub fn l1_loss_stack<A: Raster, B: Raster>(pred: &[A], target: &[B]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "stack lengths differ or are empty: {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(target) {
        total += l1_loss(p, t)?;
    }
    Ok(total / pred.len() as f64)
}

/// Per-channel counts of each intensity level.
fn channel_histograms<R: Raster + ?Sized>(img: &R) -> [[u64; LEVELS]; CHANNELS] {
    let mut h = [[0u64; LEVELS]; CHANNELS];
    for i in 0..img.len() {
        let level = img.value(i).floor().clamp(0.0, (LEVELS - 1) as f64) as usize;
        h[i % CHANNELS][level] += 1;
    }
    h
}

/// `(1/L) sum_l |cnt_l(pred) - cnt_l(target)|`, computed per channel and
/// averaged over the channels.
pub fn histogram_loss(pred: &LdrImage, target: &LdrImage) -> Result<f64> {
    check_shapes(pred, target)?;
    let hp = channel_histograms(pred);
    let ht = channel_histograms(target);
    let mut total = 0.0;
    for c in 0..CHANNELS {
        let diff: u64 = (0..LEVELS).map(|l| hp[c][l].abs_diff(ht[c][l])).sum();
        total += diff as f64 / LEVELS as f64;
    }
    Ok(total / CHANNELS as f64)
}

/// [`histogram_loss`] averaged over the exposures of a stack.
pub fn histogram_loss_stack(pred: &[LdrImage], target: &[LdrImage]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid("stack lengths differ or are empty"));
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(target) {
        total += histogram_loss(p, t)?;
    }
    Ok(total / pred.len() as f64)
}

fn soft_counts<R: Raster + ?Sized>(img: &R, bandwidth: f64) -> Vec<[f64; LEVELS]> {
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut h = vec![[0.0; LEVELS]; CHANNELS];
    for i in 0..img.len() {
        let v = img.value(i);
        let row = &mut h[i % CHANNELS];
        for (l, slot) in row.iter_mut().enumerate() {
            let d = v - l as f64;
            *slot += (-d * d * inv).exp();
        }
    }
    h
}

/// Differentiable histogram loss: each sample contributes
/// `exp(-(v - l)^2 / (2 sigma^2))` to level `l` instead of a hard count.
/// Both images are soft-counted, so identical inputs give exactly zero.
/// Returns the loss and its gradient with respect to `pred`.
pub fn soft_histogram_loss(
    pred: &RelaxedImage,
    target: &LdrImage,
    bandwidth: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    check_shapes(pred, target)?;
    let hp = soft_counts(pred, bandwidth);
    let ht = soft_counts(target, bandwidth);
    let norm = (LEVELS * CHANNELS) as f64;
    let mut loss = 0.0;
    let mut signs = vec![[0.0; LEVELS]; CHANNELS];
    for c in 0..CHANNELS {
        for l in 0..LEVELS {
            let d = hp[c][l] - ht[c][l];
            loss += d.abs();
            signs[c][l] = sign(d);
        }
    }
    loss /= norm;

    let inv_var = 1.0 / (bandwidth * bandwidth);
    let inv = 0.5 * inv_var;
    let grad = (0..pred.len())
        .map(|i| {
            let v = pred.value(i);
            let s = &signs[i % CHANNELS];
            let mut g = 0.0;
            for (l, &sl) in s.iter().enumerate() {
                if sl != 0.0 {
                    let d = v - l as f64;
                    g -= sl * d * inv_var * (-d * d * inv).exp();
                }
            }
            g / norm
        })
        .collect();
    Ok((loss, grad))
}

/// `(1/N) sum |ln(1 + mu H_pred) - ln(1 + mu H)|` and its gradient with
/// respect to the predicted radiance.
pub fn mu_law_hdr_loss(pred: &HdrImage, target: &HdrImage, mu: f64) -> Result<(f64, Vec<f64>)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be > 0, got {mu}")));
    }
    check_shapes(pred, target)?;
    mu_law_slices(pred.data(), target.data(), mu)
}

fn mu_law_slices(pred: &[f64], target: &[f64], mu: f64) -> Result<(f64, Vec<f64>)> {
    if let Some(v) = pred.iter().chain(target).find(|v| **v < 0.0) {
        return Err(Error::invalid(format!("negative radiance {v}")));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let d = (mu * p).ln_1p() - (mu * t).ln_1p();
        loss += d.abs();
        grad.push(sign(d) * mu / (1.0 + mu * p) / n);
    }
    Ok((loss / n, grad))
}

/// Mu-law loss against a fixed target, seen as a function of log radiance.
#[derive(Debug, Clone)]
pub struct MuLawLoss {
    target: Vec<f64>,
    mu: f64,
}

impl MuLawLoss {
    pub fn new(target: &HdrImage, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be > 0, got {mu}")));
        }
        Ok(Self {
            target: target.data().to_vec(),
            mu,
        })
    }
}

impl LogRadianceLoss for MuLawLoss {
    fn value_and_grad(&self, log_radiance: &[f64]) -> Result<(f64, Vec<f64>)> {
        if log_radiance.len() != self.target.len() {
            return Err(Error::invalid("log radiance and target differ in size"));
        }
        let e: Vec<f64> = log_radiance.iter().map(|v| v.exp()).collect();
        let (loss, mut grad) = mu_law_slices(&e, &self.target, self.mu)?;
        for (g, ei) in grad.iter_mut().zip(&e) {
            *g *= ei;
        }
        Ok((loss, grad))
    }
}

/// Mean squared difference of log radiance against a strictly positive target.
#[derive(Debug, Clone)]
pub struct LogL2Loss {
    target_log: Vec<f64>,
}

impl LogL2Loss {
    pub fn new(target: &HdrImage) -> Result<Self> {
        if let Some(v) = target.data().iter().find(|v| **v <= 0.0) {
            return Err(Error::invalid(format!(
                "log-domain loss needs strictly positive target radiance, found {v}"
            )));
        }
        Ok(Self {
            target_log: target.data().iter().map(|v| v.ln()).collect(),
        })
    }
}

impl LogRadianceLoss for LogL2Loss {
    fn value_and_grad(&self, log_radiance: &[f64]) -> Result<(f64, Vec<f64>)> {
        if log_radiance.len() != self.target_log.len() {
            return Err(Error::invalid("log radiance and target differ in size"));
        }
        let n = log_radiance.len() as f64;
        let mut loss = 0.0;
        let mut grad = Vec::with_capacity(log_radiance.len());
        for (a, b) in log_radiance.iter().zip(&self.target_log) {
            let d = a - b;
            loss += d * d;
            grad.push(2.0 * d / n);
        }
        Ok((loss / n, grad))
    }
}
