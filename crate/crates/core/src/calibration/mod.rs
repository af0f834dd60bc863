//! Radiometric calibration: recover the inverse camera response `g` that maps
//! an 8-bit intensity to log exposure, from a bracketed stack.

mod debevec;
mod monotone;
mod polynomial;
mod sampling;

pub use debevec::{solve_debevec, ChannelDiagnostics, DebevecOptions, DebevecSolution, Weighting};
pub use monotone::{isotonic_regression, project_monotone};
pub use polynomial::{fit_polynomial_crf, PolynomialResponse};
pub use sampling::{sample_pixels, SampleSet};

use crate::error::{Error, Result};
use crate::image::CHANNELS;

pub const LEVELS: usize = 256;
pub const Z_MIN: usize = 0;
pub const Z_MAX: usize = 255;
pub const DEFAULT_ANCHOR: usize = 128;
pub const DEFAULT_LAMBDA: f64 = 100.0;
pub const DEFAULT_PER_LEVEL: usize = 2;

/// Tabulated inverse response, one 256-entry log-exposure table per channel,
/// pinned to zero at `anchor_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    tables: [[f64; LEVELS]; CHANNELS],
    anchor_index: usize,
}

impl ResponseCurve {
    /// Build a curve from raw tables. Each channel is shifted so that the
    /// anchor entry is exactly zero.
    pub fn new(tables: [[f64; LEVELS]; CHANNELS], anchor_index: usize) -> Result<Self> {
        if anchor_index >= LEVELS {
            return Err(Error::invalid(format!("anchor index {anchor_index} out of range")));
        }
        if tables.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("response table has non-finite entries".into()));
        }
        let mut curve = Self {
            tables,
            anchor_index,
        };
        curve.reanchor();
        Ok(curve)
    }

    /// Same table for all three channels.
    pub fn from_fn(anchor_index: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        let mut t = [0.0; LEVELS];
        for (z, v) in t.iter_mut().enumerate() {
            *v = f(z);
        }
        Self::new([t; CHANNELS], anchor_index)
    }

    pub(crate) fn reanchor(&mut self) {
        let a = self.anchor_index;
        for t in &mut self.tables {
            let offset = t[a];
            for v in t.iter_mut() {
                *v -= offset;
            }
            // exact +0.0 even when offset was -0.0
            t[a] = 0.0;
        }
    }

    pub fn anchor_index(&self) -> usize {
        self.anchor_index
    }

    pub fn channel(&self, c: usize) -> &[f64; LEVELS] {
        &self.tables[c]
    }

    pub fn tables(&self) -> &[[f64; LEVELS]; CHANNELS] {
        &self.tables
    }

    pub fn g(&self, z: usize, c: usize) -> f64 {
        self.tables[c][z]
    }

    pub fn is_monotone(&self) -> bool {
        self.tables
            .iter()
            .all(|t| t.windows(2).all(|p| p[0] <= p[1]))
    }
}

/// Triangular confidence weight on `[Z_MIN, Z_MAX]`, zero at both ends.
pub fn hat_weight(z: usize) -> f64 {
    if 2 * z <= Z_MIN + Z_MAX {
        (z - Z_MIN) as f64
    } else {
        (Z_MAX - z) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hat_shape() {
        assert_eq!(hat_weight(0), 0.0);
        assert_eq!(hat_weight(255), 0.0);
        assert_eq!(hat_weight(127), 127.0);
        assert_eq!(hat_weight(128), 127.0);
        assert_eq!(hat_weight(10), 10.0);
    }

    #[test]
    fn anchoring_is_exact() {
        let c = ResponseCurve::from_fn(128, |z| ((z + 1) as f64 / 256.0).ln()).unwrap();
        assert_eq!(c.g(128, 0), 0.0);
        assert!(c.g(128, 2).is_sign_positive());
        assert!(c.is_monotone());
        assert!(ResponseCurve::from_fn(256, |_| 0.0).is_err());
    }
}
