//! Exposure-conditioned instance normalization and the Swish activation.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Planar `C x H x W` map of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid("feature map dimensions must be at least 1"));
        }
        if data.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "expected {} values for {channels}x{height}x{width}, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature map values must be finite"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// Per-exposure affine parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub ev_key: f64,
}

impl ExposureParams {
    /// `gamma = 1`, `beta = 0`.
    pub fn identity(channels: usize, ev_key: f64) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            ev_key,
        }
    }
}

/// Where the shift enters the normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormForm {
    /// `(gamma (X - mu) + beta) / (sigma + eps)`
    #[default]
    Literal,
    /// `gamma (X - mu) / (sigma + eps) + beta`
    Standard,
}

/// Per-channel mean and population standard deviation over the spatial axes.
pub fn channel_moments(x: &FeatureMap) -> Vec<(f64, f64)> {
    (0..x.channels())
        .map(|c| {
            let v = x.channel(c);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}

pub fn conditional_instance_norm(
    x: &FeatureMap,
    params: &ExposureParams,
    eps: f64,
    form: NormForm,
) -> Result<FeatureMap> {
    let c = x.channels();
    if params.gamma.len() != c || params.beta.len() != c {
        return Err(Error::invalid(format!(
            "parameter lengths {} / {} do not match {c} channels",
            params.gamma.len(),
            params.beta.len()
        )));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be >= 0, got {eps}")));
    }
    if params.gamma.iter().chain(&params.beta).any(|v| !v.is_finite()) {
        return Err(Error::invalid("gamma and beta must be finite"));
    }
    let moments = channel_moments(x);
    if let Some(k) = moments.iter().position(|&(_, s)| s + eps == 0.0) {
        return Err(Error::NumericalFailure(format!(
            "channel {k} is constant and eps = 0"
        )));
    }
    let n = x.height() * x.width();
    let mut out = vec![0.0; x.data().len()];
    out.par_chunks_mut(n).enumerate().for_each(|(k, dst)| {
        let (mu, sigma) = moments[k];
        let (g, b) = (params.gamma[k], params.beta[k]);
        let d = sigma + eps;
        for (o, &v) in dst.iter_mut().zip(x.channel(k)) {
            *o = match form {
                NormForm::Literal => (g * (v - mu) + b) / d,
                NormForm::Standard => g * (v - mu) / d + b,
            };
        }
    });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("normalization overflowed".into()));
    }
    FeatureMap::new(c, x.height(), x.width(), out)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x * sigmoid(x)`
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn swish_map(x: &FeatureMap) -> FeatureMap {
    FeatureMap {
        data: x.data.iter().map(|&v| swish(v)).collect(),
        ..x.clone()
    }
}
