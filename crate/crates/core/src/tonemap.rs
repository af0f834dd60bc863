//! HDR to display operators: global Reinhard, mu-law compression and
//! percentile normalization.

use crate::error::{Error, Result};
use crate::image::{luminance, quantize, HdrImage, LdrImage, Raster, RelaxedImage};

pub const DEFAULT_KEY: f64 = 0.18;
pub const LOG_AVERAGE_DELTA: f64 = 1e-6;
pub const DEFAULT_LOW_PERCENTILE: f64 = 0.1;
pub const DEFAULT_HIGH_PERCENTILE: f64 = 99.9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WhitePoint {
    /// Largest scaled luminance in the image.
    #[default]
    Auto,
    /// Plain `L / (1 + L)`.
    Infinite,
    Value(f64),
}

/// sRGB opto-electronic transfer function on `[0, 1]`.
pub fn srgb_encode(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// `exp(mean(ln(delta + L)))`
pub fn log_average_luminance(hdr: &HdrImage) -> f64 {
    let lum = luminance(hdr);
    let sum: f64 = lum.iter().map(|l| (LOG_AVERAGE_DELTA + l).ln()).sum();
    (sum / lum.len() as f64).exp()
}

/// Global extended Reinhard operator on luminance, colors scaled by the
/// luminance ratio, sRGB encoded and quantized.
pub fn reinhard(hdr: &HdrImage, key: f64, white: WhitePoint) -> Result<LdrImage> {
    if !(key > 0.0 && key.is_finite()) {
        return Err(Error::invalid(format!("key must be > 0, got {key}")));
    }
    let lum = luminance(hdr);
    let avg = log_average_luminance(hdr);
    let scaled: Vec<f64> = lum.iter().map(|l| key * l / avg).collect();
    let white_sq = match white {
        WhitePoint::Auto => {
            let m = scaled.iter().copied().fold(0.0, f64::max);
            m * m
        }
        WhitePoint::Infinite => f64::INFINITY,
        WhitePoint::Value(v) => {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("white point must be > 0, got {v}")));
            }
            v * v
        }
    };
    let mut out = Vec::with_capacity(hdr.len());
    for (i, (&l, &ls)) in lum.iter().zip(&scaled).enumerate() {
        let ld = if white_sq.is_infinite() || white_sq == 0.0 {
            ls / (1.0 + ls)
        } else {
            ls * (1.0 + ls / white_sq) / (1.0 + ls)
        };
        let ratio = if l > 0.0 { ld / l } else { 0.0 };
        for c in 0..3 {
            out.push(255.0 * srgb_encode(hdr.data()[3 * i + c] * ratio));
        }
    }
    Ok(quantize(&RelaxedImage::new(hdr.width(), hdr.height(), out)?))
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("mu must be > 0, got {mu}")))
    }
}

/// `ln(1 + mu h) / ln(1 + mu)`
pub fn mu_law(h: f64, mu: f64) -> f64 {
    (mu * h).ln_1p() / mu.ln_1p()
}

pub fn mu_law_inverse(t: f64, mu: f64) -> f64 {
    (t * mu.ln_1p()).exp_m1() / mu
}

/// Mu-law compression of a radiance map already normalized to `[0, 1]`.
/// The result stays on the `[0, 1]` scale.
pub fn mu_law_compress(hdr: &HdrImage, mu: f64) -> Result<HdrImage> {
    check_mu(mu)?;
    if let Some(v) = hdr.data().iter().find(|&&v| v > 1.0) {
        return Err(Error::invalid(format!(
            "mu-law input must lie in [0, 1], found {v}"
        )));
    }
    HdrImage::new(
        hdr.width(),
        hdr.height(),
        hdr.data().iter().map(|&h| mu_law(h, mu)).collect(),
    )
}

pub fn mu_law_expand(t: &HdrImage, mu: f64) -> Result<HdrImage> {
    check_mu(mu)?;
    if let Some(v) = t.data().iter().find(|&&v| v > 1.0) {
        return Err(Error::invalid(format!(
            "mu-law codes must lie in [0, 1], found {v}"
        )));
    }
    HdrImage::new(
        t.width(),
        t.height(),
        t.data().iter().map(|&v| mu_law_inverse(v, mu)).collect(),
    )
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Luminance values at the `lo` and `hi` percentiles.
pub fn percentile_bounds(hdr: &HdrImage, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(lo > 0.0 && lo < hi && hi < 100.0) {
        return Err(Error::invalid(format!(
            "percentiles must satisfy 0 < lo < hi < 100, got {lo}, {hi}"
        )));
    }
    let mut lum = luminance(hdr);
    lum.sort_by(f64::total_cmp);
    Ok((percentile(&lum, lo), percentile(&lum, hi)))
}

/// Affine map sending the `lo` luminance percentile to 0 and `hi` to 1,
/// clamped to `[0, 1]`.
pub fn scale_percentile(hdr: &HdrImage, lo: f64, hi: f64) -> Result<HdrImage> {
    let (a, b) = percentile_bounds(hdr, lo, hi)?;
    if !(b > a) {
        return Err(Error::NumericalFailure(format!(
            "luminance percentiles {lo} and {hi} coincide at {a}; image is degenerate"
        )));
    }
    HdrImage::new(
        hdr.width(),
        hdr.height(),
        hdr.data()
            .iter()
            .map(|&v| ((v - a) / (b - a)).clamp(0.0, 1.0))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::quantize_value;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> HdrImage {
        HdrImage::from_fn(w, h, |x, y, _| f(x, y)).unwrap()
    }

    #[test]
    fn zero_image_maps_to_black() {
        let img = HdrImage::new(4, 3, vec![0.0; 36]).unwrap();
        let out = reinhard(&img, DEFAULT_KEY, WhitePoint::Auto).unwrap();
        assert!(out.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn simple_operator_half() {
        // one pixel: L_s = key * L / Lbar, and with key = Lbar / L that is 1
        let img = gray(1, 1, |_, _| 2.0);
        let key = log_average_luminance(&img) / 2.0;
        let out = reinhard(&img, key, WhitePoint::Infinite).unwrap();
        let expect = quantize_value(255.0 * srgb_encode(0.5));
        assert_eq!(out.data(), &[expect; 3]);
    }

    #[test]
    fn ramp_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = HdrImage::from_fn(8, 8, |x, y, c| {
            (x + 8 * y) as f64 * 0.3 * [1.0, 0.7, 0.4][c] + rng.gen_range(0.0..0.01)
        })
        .unwrap();
        let out = reinhard(&img, 0.18, WhitePoint::Auto).unwrap();

        let mut logsum = 0.0;
        let mut lum = [0.0; 64];
        for (i, l) in lum.iter_mut().enumerate() {
            let d = &img.data()[3 * i..3 * i + 3];
            *l = 0.2126 * d[0] + 0.7152 * d[1] + 0.0722 * d[2];
            logsum += (1e-6 + *l).ln();
        }
        let avg = (logsum / 64.0).exp();
        let mut lw: f64 = 0.0;
        for l in lum {
            lw = lw.max(0.18 * l / avg);
        }
        for i in 0..64 {
            let ls = 0.18 * lum[i] / avg;
            let ld = ls * (1.0 + ls / (lw * lw)) / (1.0 + ls);
            for c in 0..3 {
                let v = img.data()[3 * i + c] * ld / lum[i];
                let v = v.clamp(0.0, 1.0);
                let e = if v <= 0.0031308 {
                    12.92 * v
                } else {
                    1.055 * v.powf(1.0 / 2.4) - 0.055
                };
                assert_eq!(out.data()[3 * i + c], quantize_value(255.0 * e));
            }
        }
    }

    #[test]
    fn reinhard_rejects_bad_key() {
        let img = gray(2, 2, |_, _| 1.0);
        assert!(reinhard(&img, 0.0, WhitePoint::Auto).is_err());
        assert!(reinhard(&img, 0.18, WhitePoint::Value(-1.0)).is_err());
    }

    #[test]
    fn reinhard_monotone_in_luminance() {
        let img = gray(16, 1, |x, _| 0.01 * 1.6f64.powi(x as i32));
        let out = reinhard(&img, 0.18, WhitePoint::Auto).unwrap();
        let v: Vec<u8> = (0..16).map(|x| out.get(x, 0, 0)).collect();
        assert!(v.windows(2).all(|p| p[0] <= p[1]), "{v:?}");
        assert_eq!(v[15], 255);
    }

    #[test]
    fn mu_law_values() {
        assert_eq!(mu_law(0.0, 5000.0), 0.0);
        assert!((mu_law(1.0, 5000.0) - 1.0).abs() < 1e-15);
        assert!((mu_law(1.0 / 5000.0, 5000.0) - 2f64.ln() / 5001f64.ln()).abs() < 1e-15);
        assert!((mu_law(1.0 / 5000.0, 5000.0) - 0.08138).abs() < 1e-5);
    }

    #[test]
    fn mu_law_round_trip_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut v: Vec<f64> = (0..300).map(|_| rng.gen_range(0.0..1.0)).collect();
        v.sort_by(f64::total_cmp);
        let img = HdrImage::new(10, 10, v.clone()).unwrap();
        let t = mu_law_compress(&img, 5000.0).unwrap();
        assert!(t.data().windows(2).all(|p| p[0] <= p[1]));
        let back = mu_law_expand(&t, 5000.0).unwrap();
        for (a, b) in back.data().iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
        let too_big = HdrImage::new(1, 1, vec![0.5, 1.5, 0.0]).unwrap();
        assert!(mu_law_compress(&too_big, 5000.0).is_err());
        assert!(mu_law_compress(&img, 0.0).is_err());
    }

    #[test]
    fn percentile_fixed_point() {
        // 1001 pixels put both percentiles exactly on order statistics
        let img = gray(7, 143, |x, y| ((x + 7 * y) as f64 / 1000.0 * 2.0 - 0.002).max(0.0));
        let once = scale_percentile(&img, 0.1, 99.9).unwrap();
        let twice = scale_percentile(&once, 0.1, 99.9).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let unit = gray(7, 143, |x, y| (((x + 7 * y) as f64 - 1.0) / 998.0).max(0.0));
        let (a, b) = percentile_bounds(&unit, 0.1, 99.9).unwrap();
        assert!(a.abs() < 1e-15 && (b - 1.0).abs() < 1e-12);
        let s = scale_percentile(&unit, 0.1, 99.9).unwrap();
        for (u, v) in unit.data().iter().zip(s.data()) {
            assert!((u.clamp(0.0, 1.0) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = gray(5, 5, |_, _| 0.7);
        assert!(matches!(
            scale_percentile(&img, 0.1, 99.9),
            Err(Error::NumericalFailure(_))
        ));
        assert!(matches!(
            scale_percentile(&img, 50.0, 10.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn fraction_below_low_percentile() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_001;
        let img = HdrImage::new(n, 1, (0..3 * n).map(|_| rng.gen_range(0.0..50.0)).collect())
            .unwrap();
        let (a, b) = percentile_bounds(&img, 0.1, 99.9).unwrap();
        let lum = luminance(&img);
        let below = lum.iter().filter(|&&l| (l - a) / (b - a) < 0.0).count();
        let above = lum.iter().filter(|&&l| (l - a) / (b - a) > 1.0).count();
        assert_eq!(below, 10);
        assert_eq!(above, 10);
    }
}
