//! Training losses: pixel L1, intensity histogram, Canny edge L1, mu-law HDR
//! loss and the contextual-bilateral feature loss, plus the weighted
//! refinement objective that combines the last three families.

mod canny;
mod cobi;
mod pixel;

pub use canny::{canny, edge_loss, CannyParams, EdgeMap, DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_SIGMA};
pub use cobi::{cobi_loss, cosine_distance, patch_features, FeatureSet, DEFAULT_SPATIAL_WEIGHT};
pub use pixel::{
    histogram_loss, histogram_loss_stack, l1_loss, l1_loss_stack, l1_loss_with_grad,
    mu_law_hdr_loss, soft_histogram_loss, LogL2Loss, MuLawLoss, DEFAULT_MU,
};

use crate::error::Result;
use crate::image::{HdrImage, Raster};

/// Term weights of the refinement objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineWeights {
    pub l1: f64,
    pub hdr: f64,
    pub cobi: f64,
}

impl Default for RefineWeights {
    fn default() -> Self {
        Self {
            l1: 1.0,
            hdr: 1.0,
            cobi: 0.1,
        }
    }
}

/// Inputs of [`composite_refine_loss`].
pub struct RefineInputs<'a, R: Raster> {
    pub pred_stack: &'a [R],
    pub target_stack: &'a [R],
    pub pred_hdr: &'a HdrImage,
    pub target_hdr: &'a HdrImage,
    pub features_pred: &'a FeatureSet,
    pub features_target: &'a FeatureSet,
}

/// `l1 * L1(stacks) + hdr * L_mu(hdr) + cobi * L_CoBi(features)`.
pub fn composite_refine_loss<R: Raster>(
    inputs: &RefineInputs<'_, R>,
    weights: &RefineWeights,
    mu: f64,
    spatial_weight: f64,
) -> Result<f64> {
    let l1 = l1_loss_stack(inputs.pred_stack, inputs.target_stack)?;
    let (hdr, _) = mu_law_hdr_loss(inputs.pred_hdr, inputs.target_hdr, mu)?;
    let cobi = cobi_loss(inputs.features_pred, inputs.features_target, spatial_weight)?;
    Ok(weights.l1 * l1 + weights.hdr * hdr + weights.cobi * cobi)
}
