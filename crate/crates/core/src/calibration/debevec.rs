//! Least-squares recovery of the inverse response with a second-difference
//! smoothness penalty.
//!
//! Per channel the unknowns are `g[0..=255]` and one log radiance per sampled
//! location. The data rows are `w(Z_ij) * (g(Z_ij) - ln E_i - EV_j)`, the
//! smoothness rows `sqrt(lambda) * w(z) * (g[z-1] - 2 g[z] + g[z+1])`. The
//! anchor entry is eliminated from the unknowns, so `g[anchor] = 0` holds
//! exactly rather than through a penalty row.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::CHANNELS;

use super::{hat_weight, ResponseCurve, SampleSet, LEVELS, Z_MAX, Z_MIN};

/// Weighting applied to data and smoothness rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// `w == 1`; saturated samples (0 or 255) are dropped from the data term.
    None,
    /// Triangular weight, zero at 0 and 255.
    #[default]
    Hat,
}

impl Weighting {
    fn data_weight(self, z: u8) -> f64 {
        match self {
            Weighting::None => {
                if z as usize == Z_MIN || z as usize == Z_MAX {
                    0.0
                } else {
                    1.0
                }
            }
            Weighting::Hat => hat_weight(z as usize),
        }
    }

    fn smooth_weight(self, z: usize) -> f64 {
        match self {
            Weighting::None => 1.0,
            Weighting::Hat => hat_weight(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebevecOptions {
    pub lambda: f64,
    pub weighting: Weighting,
    pub anchor_index: usize,
}

impl Default for DebevecOptions {
    fn default() -> Self {
        Self {
            lambda: super::DEFAULT_LAMBDA,
            weighting: Weighting::Hat,
            anchor_index: super::DEFAULT_ANCHOR,
        }
    }
}

/// Per-channel solve statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDiagnostics {
    /// Sampled locations used for this channel.
    pub samples: usize,
    /// `sum w^2 (g(Z) - ln E - EV)^2` at the solution.
    pub data_residual: f64,
    /// `sum (w g'')^2` over the interior levels.
    pub smoothness: f64,
    /// Numerical rank of the system matrix.
    pub rank: usize,
    pub unknowns: usize,
    /// Ratio of largest to smallest retained singular value.
    pub condition: f64,
}

#[derive(Debug, Clone)]
pub struct DebevecSolution {
    pub curve: ResponseCurve,
    /// Recovered `ln E_i`, indexed like the rows of the sample set.
    pub log_radiance: Vec<f64>,
    pub diagnostics: [ChannelDiagnostics; CHANNELS],
}

pub fn solve_debevec(samples: &SampleSet, opts: &DebevecOptions) -> Result<DebevecSolution> {
    if !(opts.lambda >= 0.0 && opts.lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {}", opts.lambda)));
    }
    if opts.anchor_index >= LEVELS {
        return Err(Error::invalid(format!(
            "anchor index {} out of range",
            opts.anchor_index
        )));
    }
    let p = samples.exposures();
    let needed = 2 * (Z_MAX - Z_MIN);
    let mut tables = [[0.0; LEVELS]; CHANNELS];
    let mut log_radiance = vec![0.0; samples.rows()];
    let mut diags = Vec::with_capacity(CHANNELS);
    for (c, table) in tables.iter_mut().enumerate() {
        let rows = samples.channel_rows(c);
        let n = rows.len();
        if n * p.saturating_sub(1) < needed {
            return Err(Error::InsufficientData(format!(
                "channel {c}: N*(P-1) = {n}*{} < {needed}",
                p.saturating_sub(1)
            )));
        }
        let (g, lne, diag) = solve_channel(samples, &rows, opts)?;
        *table = g;
        for (k, &i) in rows.iter().enumerate() {
            log_radiance[i] = lne[k];
        }
        diags.push(diag);
    }
    let curve = ResponseCurve::new(tables, opts.anchor_index)?;
    let diagnostics: [ChannelDiagnostics; CHANNELS] = diags
        .try_into()
        .expect("one diagnostics entry per channel");
    Ok(DebevecSolution {
        curve,
        log_radiance,
        diagnostics,
    })
}

/// Column index of `g[z]` once the anchor column is removed.
fn g_column(z: usize, anchor: usize) -> Option<usize> {
    match z.cmp(&anchor) {
        std::cmp::Ordering::Less => Some(z),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(z - 1),
    }
}

fn solve_channel(
    samples: &SampleSet,
    rows: &[usize],
    opts: &DebevecOptions,
) -> Result<([f64; LEVELS], Vec<f64>, ChannelDiagnostics)> {
    let anchor = opts.anchor_index;
    let n = rows.len();
    let evs = samples.evs();
    let g_cols = LEVELS - 1;
    let cols = g_cols + n;

    let mut data_rows: Vec<(usize, usize, f64)> = Vec::new();
    for (k, &i) in rows.iter().enumerate() {
        for (j, &z) in samples.row(i).iter().enumerate() {
            let w = opts.weighting.data_weight(z);
            if w > 0.0 {
                data_rows.push((k, j, w));
            }
        }
    }
    let smooth_range = (Z_MIN + 1)..Z_MAX;
    let smooth_rows = if opts.lambda > 0.0 { smooth_range.len() } else { 0 };
    let m = data_rows.len() + smooth_rows;
    if m == 0 {
        return Err(Error::InsufficientData("every sample is saturated".into()));
    }

    let mut a = DMatrix::<f64>::zeros(m, cols);
    let mut b = DVector::<f64>::zeros(m);
    for (r, &(k, j, w)) in data_rows.iter().enumerate() {
        let z = samples.row(rows[k])[j] as usize;
        if let Some(col) = g_column(z, anchor) {
            a[(r, col)] = w;
        }
        a[(r, g_cols + k)] = -w;
        b[r] = w * evs[j];
    }
    if opts.lambda > 0.0 {
        let sl = opts.lambda.sqrt();
        for (off, z) in smooth_range.clone().enumerate() {
            let r = data_rows.len() + off;
            let ws = sl * opts.weighting.smooth_weight(z);
            for (zz, coef) in [(z - 1, 1.0), (z, -2.0), (z + 1, 1.0)] {
                if let Some(col) = g_column(zz, anchor) {
                    a[(r, col)] += ws * coef;
                }
            }
        }
    }

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !smax.is_finite() || smax == 0.0 {
        return Err(Error::NumericalFailure("degenerate calibration system".into()));
    }
    let tol = smax * (m.max(cols) as f64) * f64::EPSILON;
    let rank = svd.rank(tol);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .filter(|&s| s > tol)
        .fold(f64::INFINITY, f64::min);
    let x = svd
        .solve(&b, tol)
        .map_err(|e| Error::NumericalFailure(format!("least-squares solve failed: {e}")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("solution is not finite".into()));
    }

    let mut g = [0.0; LEVELS];
    for (z, gz) in g.iter_mut().enumerate() {
        *gz = g_column(z, anchor).map_or(0.0, |col| x[col]);
    }
    let lne: Vec<f64> = (0..n).map(|k| x[g_cols + k]).collect();

    let data_residual = data_rows
        .iter()
        .map(|&(k, j, w)| {
            let z = samples.row(rows[k])[j] as usize;
            let r = w * (g[z] - lne[k] - evs[j]);
            r * r
        })
        .sum();
    let smoothness = smooth_range
        .map(|z| {
            let d = opts.weighting.smooth_weight(z) * (g[z - 1] - 2.0 * g[z] + g[z + 1]);
            d * d
        })
        .sum();

    Ok((
        g,
        lne,
        ChannelDiagnostics {
            samples: n,
            data_residual,
            smoothness,
            rank,
            unknowns: cols,
            condition: smax / smin,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact samples from a response that is linear in log exposure:
    /// `g(z) = (z - 128) / 32`, so an EV step of 2 moves intensity by 64.
    fn linear_log_samples() -> SampleSet {
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for c in 0..3 {
            for z in 64..=191usize {
                for rep in 0..3 {
                    coords.push((z, rep, c));
                    values.extend([(z - 64) as u8, z as u8, (z + 64) as u8]);
                }
            }
        }
        SampleSet::new(coords, values, vec![-2.0, 0.0, 2.0]).unwrap()
    }

    fn linear_log(z: usize) -> f64 {
        (z as f64 - 128.0) / 32.0
    }

    #[test]
    fn exact_recovery_with_small_lambda() {
        let s = linear_log_samples();
        let sol = solve_debevec(
            &s,
            &DebevecOptions {
                lambda: 1.0,
                weighting: Weighting::None,
                anchor_index: 128,
            },
        )
        .unwrap();
        for c in 0..3 {
            for z in 0..256 {
                assert!(
                    (sol.curve.g(z, c) - linear_log(z)).abs() < 1e-8,
                    "z={z} c={c}: {} vs {}",
                    sol.curve.g(z, c),
                    linear_log(z)
                );
            }
        }
    }

    #[test]
    fn lambda_zero_fits_data_exactly() {
        let s = linear_log_samples();
        let sol = solve_debevec(
            &s,
            &DebevecOptions {
                lambda: 0.0,
                weighting: Weighting::None,
                anchor_index: 128,
            },
        )
        .unwrap();
        for d in &sol.diagnostics {
            let np = (d.samples * 3) as f64;
            assert!(d.data_residual < 1e-16 * np, "residual {}", d.data_residual);
            assert!(d.rank < d.unknowns, "expected gauge freedom without smoothing");
        }
        // the chain through the anchor is pinned even without smoothing
        for z in [64usize, 128, 192] {
            assert!((sol.curve.g(z, 0) - linear_log(z)).abs() < 1e-8);
        }
    }

    #[test]
    fn ev_shift_invariance() {
        let s = linear_log_samples();
        let shifted = SampleSet::new(
            s.coords().to_vec(),
            (0..s.rows()).flat_map(|i| s.row(i).to_vec()).collect(),
            s.evs().iter().map(|e| e + 0.75).collect(),
        )
        .unwrap();
        let opts = DebevecOptions {
            lambda: 10.0,
            weighting: Weighting::Hat,
            anchor_index: 128,
        };
        let a = solve_debevec(&s, &opts).unwrap();
        let b = solve_debevec(&shifted, &opts).unwrap();
        for c in 0..3 {
            for z in 0..256 {
                assert!((a.curve.g(z, c) - b.curve.g(z, c)).abs() < 1e-9);
            }
        }
        for (x, y) in a.log_radiance.iter().zip(&b.log_radiance) {
            assert!((y - (x - 0.75)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_exposure_rejected() {
        let s = SampleSet::new(vec![(0, 0, 0)], vec![10], vec![0.0]).unwrap();
        assert!(matches!(
            solve_debevec(&s, &DebevecOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn negative_lambda_rejected() {
        let s = linear_log_samples();
        let opts = DebevecOptions {
            lambda: -1.0,
            ..Default::default()
        };
        assert!(matches!(solve_debevec(&s, &opts), Err(Error::InvalidArgument(_))));
    }
}
