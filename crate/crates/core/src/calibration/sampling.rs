use crate::error::{Error, Result};
use crate::image::{ExposureStack, LdrImage, Raster, CHANNELS};

use super::LEVELS;

/// Intensities of selected pixel locations across every exposure.
///
/// Row `i` of `values` holds `Z_ij` for location `coords[i]`, one column per
/// exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    coords: Vec<(usize, usize, usize)>,
    values: Vec<u8>,
    evs: Vec<f64>,
}

impl SampleSet {
    pub fn new(coords: Vec<(usize, usize, usize)>, values: Vec<u8>, evs: Vec<f64>) -> Result<Self> {
        if evs.is_empty() {
            return Err(Error::invalid("sample set needs at least one exposure"));
        }
        if values.len() != coords.len() * evs.len() {
            return Err(Error::invalid(format!(
                "{} values for {} locations x {} exposures",
                values.len(),
                coords.len(),
                evs.len()
            )));
        }
        if let Some(&(_, _, c)) = coords.iter().find(|&&(_, _, c)| c >= CHANNELS) {
            return Err(Error::invalid(format!("channel {c} out of range")));
        }
        Ok(Self {
            coords,
            values,
            evs,
        })
    }

    pub fn coords(&self) -> &[(usize, usize, usize)] {
        &self.coords
    }

    pub fn evs(&self) -> &[f64] {
        &self.evs
    }

    /// Number of sampled locations over all channels.
    pub fn rows(&self) -> usize {
        self.coords.len()
    }

    pub fn exposures(&self) -> usize {
        self.evs.len()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let p = self.evs.len();
        &self.values[i * p..(i + 1) * p]
    }

    /// Row indices belonging to channel `c`, in order.
    pub fn channel_rows(&self, c: usize) -> Vec<usize> {
        (0..self.rows()).filter(|&i| self.coords[i].2 == c).collect()
    }
}

/// Pick up to `per_level` locations for every intensity level present in the
/// reference exposure, per channel.
///
/// Candidates for a level are visited in row-major order. When there are more
/// than `per_level` of them the picks are evenly strided through that list,
/// starting with the first.
pub fn sample_pixels(
    stack: &ExposureStack<LdrImage>,
    per_level: usize,
    reference_index: usize,
) -> Result<SampleSet> {
    if stack.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "calibration needs at least 2 exposures, stack has {}",
            stack.len()
        )));
    }
    if reference_index >= stack.len() {
        return Err(Error::invalid(format!(
            "reference index {reference_index} out of range for {} exposures",
            stack.len()
        )));
    }
    if per_level == 0 {
        return Err(Error::invalid("per_level must be at least 1"));
    }

    let reference = &stack.images()[reference_index];
    let (w, h) = (reference.width(), reference.height());
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for c in 0..CHANNELS {
        let mut buckets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); LEVELS];
        for y in 0..h {
            for x in 0..w {
                buckets[reference.get(x, y, c) as usize].push((x, y));
            }
        }
        for bucket in &buckets {
            let n = bucket.len();
            let take = n.min(per_level);
            for k in 0..take {
                let (x, y) = bucket[k * n / take];
                coords.push((x, y, c));
                values.extend(stack.images().iter().map(|im| im.get(x, y, c)));
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::InsufficientData("no pixels selected from reference".into()));
    }
    SampleSet::new(coords, values, stack.evs().to_vec())
}
