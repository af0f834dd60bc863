use crate::calibration::{hat_weight, LEVELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Hat,
    Uniform,
}

/// Merge weight, tabulated on the integer intensities.
///
/// A fractional intensity uses the entry of its integer part, so the weight
/// is constant on every open segment `(k, k+1)` and carries no gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    kind: WeightKind,
    table: [f64; LEVELS],
}

impl WeightFunction {
    pub fn hat() -> Self {
        let mut table = [0.0; LEVELS];
        for (z, w) in table.iter_mut().enumerate() {
            *w = hat_weight(z);
        }
        Self {
            kind: WeightKind::Hat,
            table,
        }
    }

    pub fn uniform() -> Self {
        Self {
            kind: WeightKind::Uniform,
            table: [1.0; LEVELS],
        }
    }

    pub fn new(kind: WeightKind) -> Self {
        match kind {
            WeightKind::Hat => Self::hat(),
            WeightKind::Uniform => Self::uniform(),
        }
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn table(&self) -> &[f64; LEVELS] {
        &self.table
    }

    #[inline]
    pub fn at(&self, z: f64) -> f64 {
        self.table[(z.floor().max(0.0) as usize).min(LEVELS - 1)]
    }
}
