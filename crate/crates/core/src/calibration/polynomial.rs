//! Parametric alternative: a polynomial in normalized intensity `m = z / 255`
//! mapping to linear exposure, fitted to the exposure ratios between
//! consecutive images and normalized so that `f(1) = 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::CHANNELS;

use super::{ResponseCurve, SampleSet, LEVELS, Z_MAX, Z_MIN};

pub const MAX_ORDER: usize = 9;

/// Exposure values below this are clamped when converting to a log table.
const MIN_EXPOSURE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialResponse {
    /// `coefficients[c][k]` multiplies `m^k` for channel `c`.
    coefficients: [Vec<f64>; CHANNELS],
}

impl PolynomialResponse {
    pub fn order(&self) -> usize {
        self.coefficients[0].len() - 1
    }

    pub fn coefficients(&self, c: usize) -> &[f64] {
        &self.coefficients[c]
    }

    /// Linear exposure for a normalized intensity `m` in `[0, 1]`.
    pub fn eval(&self, m: f64, c: usize) -> f64 {
        self.coefficients[c]
            .iter()
            .rev()
            .fold(0.0, |acc, &ck| acc * m + ck)
    }

    /// Tabulate `ln f(z / 255)` as a response curve anchored at `anchor_index`.
    /// Exposures below `1e-6` (near black, where a fitted polynomial may
    /// dip below zero) are clamped before the logarithm.
    pub fn to_response_curve(&self, anchor_index: usize) -> Result<ResponseCurve> {
        let mut tables = [[0.0; LEVELS]; CHANNELS];
        for (c, t) in tables.iter_mut().enumerate() {
            for (z, v) in t.iter_mut().enumerate() {
                *v = self.eval(z as f64 / Z_MAX as f64, c).max(MIN_EXPOSURE).ln();
            }
        }
        ResponseCurve::new(tables, anchor_index)
    }
}

pub fn fit_polynomial_crf(samples: &SampleSet, order: usize) -> Result<PolynomialResponse> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::invalid(format!(
            "polynomial order must be in [1, {MAX_ORDER}], got {order}"
        )));
    }
    let p = samples.exposures();
    let needed = 2 * (Z_MAX - Z_MIN);
    let evs = samples.evs();
    let mut coefficients: [Vec<f64>; CHANNELS] = Default::default();
    for (c, coef) in coefficients.iter_mut().enumerate() {
        let rows = samples.channel_rows(c);
        if rows.len() * p.saturating_sub(1) < needed {
            return Err(Error::InsufficientData(format!(
                "channel {c}: N*(P-1) = {}*{} < {needed}",
                rows.len(),
                p.saturating_sub(1)
            )));
        }
        // With c_K = 1 - sum_{k<K} c_k the pair residual
        // f(a) - R f(b) is affine in c_0..c_{K-1}.
        let mut lhs: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for &i in &rows {
            let zs = samples.row(i);
            for j in 0..p - 1 {
                let (za, zb) = (zs[j] as usize, zs[j + 1] as usize);
                let unsaturated = |z: usize| z > Z_MIN && z < Z_MAX;
                if !unsaturated(za) || !unsaturated(zb) {
                    continue;
                }
                let a = za as f64 / Z_MAX as f64;
                let b = zb as f64 / Z_MAX as f64;
                let ratio = (evs[j] - evs[j + 1]).exp();
                let ak = a.powi(order as i32);
                let bk = b.powi(order as i32);
                lhs.push(
                    (0..order)
                        .map(|k| {
                            (a.powi(k as i32) - ak) - ratio * (b.powi(k as i32) - bk)
                        })
                        .collect(),
                );
                rhs.push(-(ak - ratio * bk));
            }
        }
        if lhs.len() < order {
            return Err(Error::InsufficientData(format!(
                "channel {c}: {} unsaturated exposure pairs for order {order}",
                lhs.len()
            )));
        }
        let a = DMatrix::from_fn(lhs.len(), order, |r, k| lhs[r][k]);
        let b = DVector::from_vec(rhs);
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * (lhs.len().max(order) as f64) * f64::EPSILON;
        if svd.rank(tol) < order {
            return Err(Error::InsufficientData(format!(
                "channel {c}: exposure pairs do not determine an order-{order} polynomial"
            )));
        }
        let x = svd
            .solve(&b, tol)
            .map_err(|e| Error::NumericalFailure(e.to_string()))?;
        let mut full: Vec<f64> = x.iter().copied().collect();
        full.push(1.0 - full.iter().sum::<f64>());
        if full.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("polynomial fit is not finite".into()));
        }
        *coef = full;
    }
    Ok(PolynomialResponse { coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rows linking `z`, `2z`, `4z` at one-stop spacing: exact for a linear camera.
    fn linear_camera_samples() -> SampleSet {
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for c in 0..3 {
            for z in 1..=63u8 {
                for rep in 0..5 {
                    coords.push((z as usize, rep, c));
                    values.extend([z, 2 * z, 4 * z]);
                }
            }
        }
        let ln2 = std::f64::consts::LN_2;
        SampleSet::new(coords, values, vec![-ln2, 0.0, ln2]).unwrap()
    }

    #[test]
    fn linear_camera_is_identity() {
        let poly = fit_polynomial_crf(&linear_camera_samples(), 1).unwrap();
        for c in 0..3 {
            let k = poly.coefficients(c);
            assert!(k[0].abs() < 1e-9 && (k[1] - 1.0).abs() < 1e-9, "{k:?}");
        }
        assert_eq!(poly.order(), 1);
        assert!((poly.eval(1.0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn order_out_of_range() {
        let s = linear_camera_samples();
        assert!(matches!(fit_polynomial_crf(&s, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(fit_polynomial_crf(&s, 10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn too_few_samples() {
        let s = SampleSet::new(vec![(0, 0, 0)], vec![10, 20], vec![0.0, 1.0]).unwrap();
        assert!(matches!(fit_polynomial_crf(&s, 2), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn log_table_is_anchored() {
        let poly = fit_polynomial_crf(&linear_camera_samples(), 1).unwrap();
        let curve = poly.to_response_curve(128).unwrap();
        assert_eq!(curve.g(128, 0), 0.0);
        assert!((curve.g(255, 0) - (255.0f64 / 128.0).ln()).abs() < 1e-8);
    }
}
