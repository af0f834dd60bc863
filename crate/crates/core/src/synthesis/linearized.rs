use crate::calibration::{ResponseCurve, LEVELS};
use crate::error::{Error, Result};
use crate::image::CHANNELS;

const Z_TOP: f64 = (LEVELS - 1) as f64;

/// Piece-wise linear extension of a tabulated inverse response.
///
/// `slopes[c][0] = g[0]` and `slopes[c][z] = g[z] - g[z-1]` for `z >= 1`. The
/// first entry is a value rather than a difference; it is kept that way
/// because it is the defined derivative at an intensity of exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedResponse {
    base: ResponseCurve,
    slopes: [[f64; LEVELS]; CHANNELS],
}

pub fn linearize(crf: &ResponseCurve) -> LinearizedResponse {
    let mut slopes = [[0.0; LEVELS]; CHANNELS];
    for (c, s) in slopes.iter_mut().enumerate() {
        let g = crf.channel(c);
        s[0] = g[0];
        for z in 1..LEVELS {
            s[z] = g[z] - g[z - 1];
        }
    }
    LinearizedResponse {
        base: crf.clone(),
        slopes,
    }
}

fn check_range(z: f64) -> Result<()> {
    if (0.0..=Z_TOP).contains(&z) {
        Ok(())
    } else {
        Err(Error::invalid(format!("intensity {z} outside [0, 255]")))
    }
}

impl LinearizedResponse {
    pub fn base(&self) -> &ResponseCurve {
        &self.base
    }

    pub fn slopes(&self, c: usize) -> &[f64; LEVELS] {
        &self.slopes[c]
    }

    pub fn eval_g(&self, z: f64, c: usize) -> Result<f64> {
        check_range(z)?;
        Ok(self.value(z, c))
    }

    pub fn deriv_g(&self, z: f64, c: usize) -> Result<f64> {
        check_range(z)?;
        Ok(self.slope(z, c))
    }

    /// `g[floor z] + frac(z) * s[floor z + 1]`; exact table value at integers.
    /// Caller guarantees `z` in `[0, 255]`.
    #[inline]
    pub(crate) fn value(&self, z: f64, c: usize) -> f64 {
        let k = z.floor();
        let g = self.base.channel(c);
        let ki = k as usize;
        if ki >= LEVELS - 1 {
            return g[LEVELS - 1];
        }
        let frac = z - k;
        if frac == 0.0 {
            g[ki]
        } else {
            g[ki] + frac * self.slopes[c][ki + 1]
        }
    }

    /// Slope of the segment `(ceil z - 1, ceil z]` containing `z`; `s[0]` at 0.
    #[inline]
    pub(crate) fn slope(&self, z: f64, c: usize) -> f64 {
        if z <= 0.0 {
            self.slopes[c][0]
        } else {
            self.slopes[c][(z.ceil() as usize).min(LEVELS - 1)]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn log_curve() -> ResponseCurve {
        // anchoring at 255 leaves ln((z+1)/256) untouched
        ResponseCurve::from_fn(255, |z| ((z + 1) as f64 / 256.0).ln()).unwrap()
    }

    fn toy_curve() -> ResponseCurve {
        let mut t = [0.0; LEVELS];
        for (z, v) in t.iter_mut().enumerate() {
            *v = z as f64 * 0.1 - 5.0;
        }
        t[4] = -2.1;
        t[5] = -2.0;
        t[6] = 1.0;
        t[7] = 1.2;
        // anchor on an entry that is already zero so nothing shifts
        t[50] = 0.0;
        ResponseCurve::new([t; 3], 50).unwrap()
    }

    #[test]
    fn slope_cases() {
        let lin = linearize(&toy_curve());
        assert!((lin.slopes(0)[5] - 0.1).abs() < 1e-15);
        assert_eq!(lin.slopes(0)[0], -5.0);
        assert_eq!(lin.deriv_g(0.0, 0).unwrap(), -5.0);
    }

    #[test]
    fn log_curve_slopes() {
        let lin = linearize(&log_curve());
        for z in 1..256usize {
            let expect = ((z + 1) as f64 / z as f64).ln();
            assert!((lin.slopes(1)[z] - expect).abs() < 1e-14, "z={z}");
        }
    }

    #[test]
    fn evaluation_examples() {
        let lin = linearize(&toy_curve());
        assert_eq!(lin.eval_g(7.0, 0).unwrap(), 1.2);
        assert!((lin.eval_g(6.5, 0).unwrap() - 1.1).abs() < 1e-15);
        assert_eq!(lin.deriv_g(5.0, 0).unwrap(), lin.slopes(0)[5]);
        assert_eq!(lin.deriv_g(4.3, 0).unwrap(), lin.slopes(0)[5]);
        assert!(lin.eval_g(-0.1, 0).is_err());
        assert!(lin.eval_g(255.5, 0).is_err());
        assert!(lin.deriv_g(256.0, 0).is_err());
        assert_eq!(lin.eval_g(255.0, 0).unwrap(), lin.base().g(255, 0));
    }

    #[test]
    fn interpolation_matches_two_point_formula() {
        let lin = linearize(&log_curve());
        let g = log_curve();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let z: f64 = rng.gen_range(0.0..255.0);
            let (lo, hi) = (z.floor() as usize, z.ceil() as usize);
            let t = z - lo as f64;
            let oracle = (1.0 - t) * g.g(lo, 2) + t * g.g(hi, 2);
            assert!((lin.eval_g(z, 2).unwrap() - oracle).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_finite_difference_inside_segments() {
        let lin = linearize(&log_curve());
        let h = 0.1;
        for k in 0..255 {
            let z = k as f64 + 0.5;
            let fd = (lin.eval_g(z + h, 0).unwrap() - lin.eval_g(z - h, 0).unwrap()) / (2.0 * h);
            assert!((fd - lin.deriv_g(z, 0).unwrap()).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn continuous_at_breakpoints() {
        let lin = linearize(&log_curve());
        let eps = 1e-9;
        for z in 1..255 {
            let z = z as f64;
            let jump = (lin.eval_g(z - eps, 0).unwrap() - lin.eval_g(z + eps, 0).unwrap()).abs();
            let s = lin.slope(z - eps, 0).abs().max(lin.slope(z + eps, 0).abs());
            assert!(jump <= s * 2.0 * eps * (1.0 + 1e-6) + 1e-15);
        }
    }
}
