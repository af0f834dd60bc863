//! Contextual-bilateral feature matching loss.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{LdrImage, Raster, CHANNELS};

pub const DEFAULT_SPATIAL_WEIGHT: f64 = 0.1;

/// Feature vectors with the normalized image position each one came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    features: Vec<f64>,
    coords: Vec<[f64; 2]>,
}

impl FeatureSet {
    pub fn new(features: Vec<Vec<f64>>, coords: Vec<[f64; 2]>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("feature set is empty"));
        }
        if features.len() != coords.len() {
            return Err(Error::invalid(format!(
                "{} features but {} coordinates",
                features.len(),
                coords.len()
            )));
        }
        let dim = features[0].len();
        if dim == 0 || features.iter().any(|f| f.len() != dim) {
            return Err(Error::invalid("features must share one nonzero dimension"));
        }
        if features.iter().flatten().chain(coords.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("features and coordinates must be finite"));
        }
        Ok(Self {
            dim,
            features: features.concat(),
            coords,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature(&self, k: usize) -> &[f64] {
        &self.features[k * self.dim..(k + 1) * self.dim]
    }

    pub fn coord(&self, k: usize) -> [f64; 2] {
        self.coords[k]
    }
}

/// `1 - cos(a, b)`; a zero vector has cosine similarity 0 with everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        1.0 - dot / (na * nb)
    }
}

/// `(1/M) sum_j min_k [D_cos(p_j, q_k) + w_s * |x_pj - x_qk|^2]`.
///
/// Directional: every feature of `p` looks for its best match in `q`.
pub fn cobi_loss(p: &FeatureSet, q: &FeatureSet, spatial_weight: f64) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::invalid(format!(
            "feature dimensions differ: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    if !(spatial_weight >= 0.0 && spatial_weight.is_finite()) {
        return Err(Error::invalid(format!(
            "spatial weight must be >= 0, got {spatial_weight}"
        )));
    }
    let minima: Vec<f64> = (0..p.len())
        .into_par_iter()
        .map(|j| {
            let (fp, cp) = (p.feature(j), p.coord(j));
            let mut best = f64::INFINITY;
            for k in 0..q.len() {
                let cq = q.coord(k);
                let d2 = (cp[0] - cq[0]).powi(2) + (cp[1] - cq[1]).powi(2);
                let cost = cosine_distance(fp, q.feature(k)) + spatial_weight * d2;
                if cost < best {
                    best = cost;
                }
            }
            best
        })
        .collect();
    Ok(minima.iter().sum::<f64>() / p.len() as f64)
}

/// Flattened RGB patches (scaled to `[0, 1]`) as features, positioned at the
/// normalized patch centers.
pub fn patch_features(img: &LdrImage, patch: usize, stride: usize) -> Result<FeatureSet> {
    let (w, h) = (img.width(), img.height());
    if patch == 0 || patch > w.min(h) {
        return Err(Error::invalid(format!(
            "patch size {patch} must be in [1, {}]",
            w.min(h)
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let mut features = Vec::new();
    let mut coords = Vec::new();
    let half = patch as f64 / 2.0;
    for y0 in (0..=h - patch).step_by(stride) {
        for x0 in (0..=w - patch).step_by(stride) {
            let mut f = Vec::with_capacity(patch * patch * CHANNELS);
            for y in y0..y0 + patch {
                for x in x0..x0 + patch {
                    for c in 0..CHANNELS {
                        f.push(f64::from(img.get(x, y, c)) / 255.0);
                    }
                }
            }
            features.push(f);
            coords.push([(x0 as f64 + half) / w as f64, (y0 as f64 + half) / h as f64]);
        }
    }
    FeatureSet::new(features, coords)
}
