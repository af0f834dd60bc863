//! The differentiable synthesis layer.
//!
//! [`linearize`] turns a tabulated response into a continuous piece-wise
//! linear function, [`merge`] fuses a stack into radiance through it, and
//! [`merge_backward`] carries a loss gradient on log radiance back to every
//! intensity of every exposure.

mod gradcheck;
mod linearized;
mod merge;
mod weight;

pub use gradcheck::{grad_check, GradCheckFailure, GradCheckOptions, GradCheckReport};
pub use linearized::{linearize, LinearizedResponse};
pub use merge::{merge, merge_backward, merge_log, GradientImage, MAX_EXPOSURES};
pub use weight::{WeightFunction, WeightKind};

pub(crate) use merge::{check_same_shape, merge_sample};

use crate::error::Result;

/// A scalar loss on merged log radiance, with its gradient `dL/d ln E`.
pub trait LogRadianceLoss: Sync {
    fn value_and_grad(&self, log_radiance: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn value(&self, log_radiance: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(log_radiance)?.0)
    }
}

/// The zero functional.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroLoss;

impl LogRadianceLoss for ZeroLoss {
    fn value_and_grad(&self, log_radiance: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((0.0, vec![0.0; log_radiance.len()]))
    }
}

/// `L = sum ln E`, whose upstream gradient is all ones.
#[derive(Debug, Clone, Copy, Default)]
pub struct SumLogRadiance;

impl LogRadianceLoss for SumLogRadiance {
    fn value_and_grad(&self, log_radiance: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((log_radiance.iter().sum(), vec![1.0; log_radiance.len()]))
    }
}
