//! PSNR, SSIM and MS-SSIM on 8-bit images.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{luma_of, quantize_value, HdrImage, LdrImage, Raster, BT709};
use crate::tonemap::{mu_law_compress, scale_percentile, DEFAULT_HIGH_PERCENTILE, DEFAULT_LOW_PERCENTILE};

/// Reported for identical images instead of infinity, and the ceiling of
/// every PSNR value.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn check_shapes(a: &LdrImage, b: &LdrImage) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::invalid(format!(
            "image shapes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse(a: &LdrImage, b: &LdrImage) -> Result<f64> {
    check_shapes(a, b)?;
    let total: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum();
    Ok(total / a.data().len() as f64)
}

/// `10 log10(255^2 / MSE)` over all channels, capped at [`PSNR_CAP`].
pub fn psnr(a: &LdrImage, b: &LdrImage) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (255.0 * 255.0 / m).log10()).min(PSNR_CAP))
}

/// Normalized 11-tap Gaussian with sigma 1.5.
pub fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Single-channel plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn luma(img: &LdrImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: luma_of(img, BT709),
        }
    }

    /// 2x2 mean pooling; an odd trailing row or column is dropped.
    pub fn downsample(&self) -> Self {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let at = |dx: usize, dy: usize| self.data[(2 * y + dy) * self.width + 2 * x + dx];
                data.push((at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1)) / 4.0);
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }
}

/// Valid-mode separable filtering.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let src = &data[y * w + x..y * w + x + SSIM_WINDOW];
            rows[y * ow + x] = src.iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|t| k[t] * rows[(y + t) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term over all valid windows.
pub fn ssim_components(a: &Plane, b: &Plane) -> Result<(f64, f64)> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::invalid("plane shapes differ"));
    }
    if a.width.min(a.height) < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs both dimensions >= {SSIM_WINDOW}, got {}x{}",
            a.width, a.height
        )));
    }
    let (w, h) = (a.width, a.height);
    let k = ssim_kernel();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect()
    };
    let mu_a = filter_valid(&a.data, w, h, &k);
    let mu_b = filter_valid(&b.data, w, h, &k);
    let aa = filter_valid(&prod(&|x, _| x * x), w, h, &k);
    let bb = filter_valid(&prod(&|_, y| y * y), w, h, &k);
    let ab = filter_valid(&prod(&|x, y| x * y), w, h, &k);
    let (mut s_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let cs = (2.0 * cov + SSIM_C2) / (va + vb + SSIM_C2);
        let l = (2.0 * ma * mb + SSIM_C1) / (ma * ma + mb * mb + SSIM_C1);
        s_sum += l * cs;
        cs_sum += cs;
    }
    let n = mu_a.len() as f64;
    Ok((s_sum / n, cs_sum / n))
}

/// Single-scale SSIM on BT.709 luma.
pub fn ssim(a: &LdrImage, b: &LdrImage) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(ssim_components(&Plane::luma(a), &Plane::luma(b))?.0)
}

/// Multi-scale SSIM. With fewer than five levels the leading weights are
/// renormalized to sum to one. Negative terms are clamped to zero before
/// exponentiation.
pub fn ms_ssim(a: &LdrImage, b: &LdrImage, levels: usize) -> Result<f64> {
    check_shapes(a, b)?;
    if !(1..=MS_SSIM_WEIGHTS.len()).contains(&levels) {
        return Err(Error::invalid(format!("levels must be in 1..=5, got {levels}")));
    }
    let need = SSIM_WINDOW << (levels - 1);
    if a.width().min(a.height()) < need {
        return Err(Error::invalid(format!(
            "{levels}-level MS-SSIM needs both dimensions >= {need}, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    let weights = &MS_SSIM_WEIGHTS[..levels];
    let total: f64 = weights.iter().sum();
    let (mut pa, mut pb) = (Plane::luma(a), Plane::luma(b));
    let mut score = 1.0;
    for (l, w) in weights.iter().enumerate() {
        let (s, cs) = ssim_components(&pa, &pb)?;
        let term = if l + 1 == levels { s } else { cs };
        score *= term.max(0.0).powf(w / total);
        if l + 1 < levels {
            pa = pa.downsample();
            pb = pb.downsample();
        }
    }
    Ok(score)
}

/// Display-referred 8-bit version of a radiance map: percentile scaling,
/// mu-law compression, then quantization.
pub fn hdr_to_display(hdr: &HdrImage, mu: f64) -> Result<LdrImage> {
    let scaled = scale_percentile(hdr, DEFAULT_LOW_PERCENTILE, DEFAULT_HIGH_PERCENTILE)?;
    let t = mu_law_compress(&scaled, mu)?;
    LdrImage::new(
        t.width(),
        t.height(),
        t.data().iter().map(|&v| quantize_value(255.0 * v)).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    /// Absent when the images are too small for five levels.
    pub ms_ssim: Option<f64>,
}

pub fn compare_ldr(a: &LdrImage, b: &LdrImage) -> Result<MetricReport> {
    let ms = if a.width().min(a.height()) >= SSIM_WINDOW << 4 {
        Some(ms_ssim(a, b, 5)?)
    } else {
        None
    };
    Ok(MetricReport {
        psnr: psnr(a, b)?,
        ssim: ssim(a, b)?,
        ms_ssim: ms,
    })
}

/// Metrics between two radiance maps after [`hdr_to_display`].
pub fn compare_hdr(pred: &HdrImage, target: &HdrImage, mu: f64) -> Result<MetricReport> {
    compare_ldr(&hdr_to_display(pred, mu)?, &hdr_to_display(target, mu)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, w: usize, h: usize) -> LdrImage {
        LdrImage::from_fn(w, h, |_, _, _| rng.gen()).unwrap()
    }

    /// Per-window double loop straight from the definition.
    fn ssim_oracle(a: &Plane, b: &Plane) -> f64 {
        let k = ssim_kernel();
        let mut total = 0.0;
        let mut n = 0;
        for y0 in 0..=a.height - 11 {
            for x0 in 0..=a.width - 11 {
                let (mut ma, mut mb) = (0.0, 0.0);
                for dy in 0..11 {
                    for dx in 0..11 {
                        let i = (y0 + dy) * a.width + x0 + dx;
                        ma += k[dy] * k[dx] * a.data[i];
                        mb += k[dy] * k[dx] * b.data[i];
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for dy in 0..11 {
                    for dx in 0..11 {
                        let i = (y0 + dy) * a.width + x0 + dx;
                        let wgt = k[dy] * k[dx];
                        va += wgt * (a.data[i] - ma).powi(2);
                        vb += wgt * (b.data[i] - mb).powi(2);
                        cov += wgt * (a.data[i] - ma) * (b.data[i] - mb);
                    }
                }
                total += (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                n += 1;
            }
        }
        total / n as f64
    }

    #[test]
    fn psnr_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = LdrImage::from_fn(16, 16, |_, _, _| rng.gen_range(0..255)).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);
        let b = LdrImage::from_fn(16, 16, |x, y, c| a.get(x, y, c) + 1).unwrap();
        assert!((psnr(&a, &b).unwrap() - 48.1308).abs() < 1e-3);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let c = random(&mut rng, 16, 16);
        let mut s = 0.0;
        for i in 0..a.data().len() {
            s += (f64::from(a.data()[i]) - f64::from(c.data()[i])).powi(2);
        }
        let expect = 10.0 * (65025.0 / (s / 768.0)).log10();
        assert!((psnr(&a, &c).unwrap() - expect).abs() < 1e-9);
        assert!(psnr(&a, &LdrImage::filled(4, 4, 0).unwrap()).is_err());
    }

    #[test]
    fn ssim_identity_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&mut rng, 20, 17);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let c100 = LdrImage::filled(12, 12, 100).unwrap();
        let c200 = LdrImage::filled(12, 12, 200).unwrap();
        let (p, q) = (Plane::luma(&c100).data[0], Plane::luma(&c200).data[0]);
        let expect = (2.0 * p * q + SSIM_C1) / (p * p + q * q + SSIM_C1);
        assert!((ssim(&c100, &c200).unwrap() - expect).abs() < 1e-9);
        assert!(ssim(&random(&mut rng, 10, 20), &random(&mut rng, 10, 20)).is_err());
    }

    #[test]
    fn ssim_matches_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let a = random(&mut rng, 32, 32);
            let b = random(&mut rng, 32, 32);
            let got = ssim(&a, &b).unwrap();
            let want = ssim_oracle(&Plane::luma(&a), &Plane::luma(&b));
            assert!((got - want).abs() < 1e-9, "{got} {want}");
            assert!((got - ssim(&b, &a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn ssim_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = LdrImage::from_fn(16, 16, |_, _, _| rng.gen_range(0..200)).unwrap();
        let b = LdrImage::from_fn(16, 16, |_, _, _| rng.gen_range(0..200)).unwrap();
        let shift = |img: &LdrImage| LdrImage::from_fn(16, 16, |x, y, c| img.get(x, y, c) + 40).unwrap();
        let s0 = ssim(&a, &b).unwrap();
        let s1 = ssim(&shift(&a), &shift(&b)).unwrap();
        // the luminance term moves with the means; contrast-structure does not
        let (_, cs0) = ssim_components(&Plane::luma(&a), &Plane::luma(&b)).unwrap();
        let (_, cs1) = ssim_components(&Plane::luma(&shift(&a)), &Plane::luma(&shift(&b))).unwrap();
        assert!((cs0 - cs1).abs() < 1e-9);
        assert!(s0.is_finite() && s1.is_finite());
    }

    #[test]
    fn ms_ssim_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(&mut rng, 176, 180);
        let b = random(&mut rng, 176, 180);
        assert!((ms_ssim(&a, &a, 5).unwrap() - 1.0).abs() < 1e-9);
        assert!((ms_ssim(&a, &b, 1).unwrap() - ssim(&a, &b).unwrap()).abs() < 1e-12);
        assert!((ms_ssim(&a, &b, 5).unwrap() - ms_ssim(&b, &a, 5).unwrap()).abs() < 1e-12);
        assert!(ms_ssim(&random(&mut rng, 100, 200), &random(&mut rng, 100, 200), 5).is_err());
        assert!(ms_ssim(&a, &b, 0).is_err());
        assert!(ms_ssim(&a, &b, 6).is_err());
    }

    #[test]
    fn ms_ssim_compositional_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random(&mut rng, 256, 256);
        let b = LdrImage::from_fn(256, 256, |x, y, c| {
            a.get(x, y, c).saturating_add(rng.gen_range(0..40))
        })
        .unwrap();
        let mut pa = Plane::luma(&a);
        let mut pb = Plane::luma(&b);
        let mut expect = 1.0;
        for (l, w) in MS_SSIM_WEIGHTS.iter().enumerate() {
            let (s, cs) = ssim_components(&pa, &pb).unwrap();
            if l == 4 {
                assert!((s - ssim_oracle(&pa, &pb)).abs() < 1e-9);
                expect *= s.powf(*w / MS_SSIM_WEIGHTS.iter().sum::<f64>());
            } else {
                expect *= cs.powf(*w / MS_SSIM_WEIGHTS.iter().sum::<f64>());
            }
            let mut half = vec![0.0; (pa.width / 2) * (pa.height / 2)];
            for y in 0..pa.height / 2 {
                for x in 0..pa.width / 2 {
                    let mut s = 0.0;
                    for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        s += pa.data[(2 * y + dy) * pa.width + 2 * x + dx];
                    }
                    half[y * (pa.width / 2) + x] = s / 4.0;
                }
            }
            let da = pa.downsample();
            assert_eq!(da.data, half);
            pa = da;
            pb = pb.downsample();
        }
        assert!((ms_ssim(&a, &b, 5).unwrap() - expect).abs() < 1e-6);
    }

    #[test]
    fn hdr_display_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = HdrImage::from_fn(16, 16, |_, _, _| rng.gen_range(0.0..100.0)).unwrap();
        let report = compare_hdr(&h, &h, 5000.0).unwrap();
        assert_eq!(report.psnr, 99.0);
        assert!((report.ssim - 1.0).abs() < 1e-9);
        assert!(report.ms_ssim.is_none());
        let d = hdr_to_display(&h, 5000.0).unwrap();
        assert_eq!(d.width(), 16);
    }
}
