//! Central finite-difference check of the merge backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{ExposureStack, RelaxedImage, CHANNELS};

use super::{merge_backward, merge_log, merge_sample, LinearizedResponse, LogRadianceLoss, WeightFunction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Finite-difference step, in intensity units. Must lie in `(0, 0.5)`.
    pub h: f64,
    pub seed: u64,
    /// Number of coordinates to check.
    pub samples: usize,
    /// Relative error above which a coordinate is reported as a failure.
    pub tolerance: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 0.25,
            seed: 0,
            samples: 500,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckFailure {
    pub image: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub num_checked: usize,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compare the analytic gradient of `loss(merge(stack))` against central
/// differences at seeded random coordinates.
///
/// The numeric side combines central differences at `h` and `h / 2`
/// (Richardson), which cancels the `h^2` truncation term.
///
/// Coordinates whose `[z - h, z + h]` window touches an integer breakpoint
/// are skipped; the draw continues until `samples` coordinates are checked or
/// the draw budget runs out, so `num_checked` can fall short on stacks whose
/// values sit mostly on integers.
pub fn grad_check<L: LogRadianceLoss + ?Sized>(
    stack: &ExposureStack<RelaxedImage>,
    lin: &LinearizedResponse,
    w: &WeightFunction,
    loss: &L,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let h = opts.h;
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::invalid(format!("finite-difference step must be in (0, 0.5), got {h}")));
    }
    let log = merge_log(stack, lin, w)?;
    let (_, upstream) = loss.value_and_grad(&log)?;
    let grad = merge_backward(stack, lin, w, &upstream)?;

    let p = stack.len();
    let n = stack.samples_per_image();
    let evs = stack.evs();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checked = 0;
    let mut max_rel_err: f64 = 0.0;
    let mut failures = Vec::new();
    let mut perturbed = log.clone();
    let mut zs = vec![0.0; p];
    let budget = opts.samples.saturating_mul(100).max(1000);
    for _ in 0..budget {
        if checked >= opts.samples {
            break;
        }
        let j = rng.gen_range(0..p);
        let i = rng.gen_range(0..n);
        let z = stack.images()[j].data()[i];
        if (z - h).floor() != (z + h).floor() || z - h <= z.floor() {
            continue;
        }
        let c = i % CHANNELS;
        for (k, im) in stack.images().iter().enumerate() {
            zs[k] = im.data()[i];
        }
        let mut central = |step: f64| -> Result<f64> {
            zs[j] = z + step;
            perturbed[i] = merge_sample(&zs, evs, lin, w, c);
            let plus = loss.value(&perturbed)?;
            zs[j] = z - step;
            perturbed[i] = merge_sample(&zs, evs, lin, w, c);
            let minus = loss.value(&perturbed)?;
            perturbed[i] = log[i];
            Ok((plus - minus) / (2.0 * step))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        let numeric = (4.0 * fine - coarse) / 3.0;
        let analytic = grad.get(j, i);
        let rel_err = relative_error(analytic, numeric);
        if !rel_err.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite gradient at image {j}, sample {i}"
            )));
        }
        max_rel_err = max_rel_err.max(rel_err);
        if rel_err > opts.tolerance {
            failures.push(GradCheckFailure {
                image: j,
                index: i,
                analytic,
                numeric,
                rel_err,
            });
        }
        checked += 1;
    }
    Ok(GradCheckReport {
        max_rel_err,
        num_checked: checked,
        failures,
    })
}
