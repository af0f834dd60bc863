//! Image containers and pixel-space helpers.
//!
//! Every image uses one canonical layout: RGB, row-major, channel-interleaved,
//! so sample `i` of pixel `(x, y)` channel `c` lives at `(y * width + x) * 3 + c`.

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// BT.709 luma weights.
pub const BT709: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Read-only access shared by all image kinds.
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;

    /// Sample `i` in the interleaved layout, as a real number.
    fn value(&self, i: usize) -> f64;

    fn len(&self) -> usize {
        self.width() * self.height() * CHANNELS
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    fn same_shape<R: Raster + ?Sized>(&self, other: &R) -> bool {
        self.width() == other.width() && self.height() == other.height()
    }

    fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if len != width * height * CHANNELS {
        return Err(Error::invalid(format!(
            "data length {len} does not match {width}x{height}x{CHANNELS}"
        )));
    }
    Ok(())
}

/// 8-bit display-referred image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdrImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LdrImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height * CHANNELS])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, data)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    /// Embed into the continuous domain without changing any value.
    pub fn to_relaxed(&self) -> RelaxedImage {
        RelaxedImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

impl Raster for LdrImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn value(&self, i: usize) -> f64 {
        f64::from(self.data[i])
    }
}

/// Continuous relaxation of an 8-bit image: real intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RelaxedImage {
    /// Values are clamped into `[0, 255]`; non-finite input is rejected.
    pub fn new(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite intensity at sample {i}")));
        }
        for v in &mut data {
            *v = v.clamp(0.0, 255.0);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    /// Writes a value, clamped into `[0, 255]`.
    pub fn set(&mut self, i: usize, v: f64) {
        self.data[i] = v.clamp(0.0, 255.0);
    }
}

impl Raster for RelaxedImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn value(&self, i: usize) -> f64 {
        self.data[i]
    }
}

/// Linear scene radiance.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "radiance must be finite and non-negative, sample {i} is {}",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, data)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

impl Raster for HdrImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn value(&self, i: usize) -> f64 {
        self.data[i]
    }
}

/// Per-pixel BT.709 luminance, row-major.
pub fn luminance(hdr: &HdrImage) -> Vec<f64> {
    luma_of(hdr, BT709)
}

pub(crate) fn luma_of<R: Raster + ?Sized>(img: &R, weights: [f64; 3]) -> Vec<f64> {
    (0..img.pixel_count())
        .map(|p| {
            let i = p * CHANNELS;
            weights[0] * img.value(i) + weights[1] * img.value(i + 1) + weights[2] * img.value(i + 2)
        })
        .collect()
}

/// Round half away from zero and clamp into the 8-bit range.
pub fn quantize_value(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn quantize(img: &RelaxedImage) -> LdrImage {
    LdrImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| quantize_value(v)).collect(),
    }
}

/// Unit in which exposure values are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ExposureUnit {
    /// Natural-log exposure (the internal unit).
    #[serde(rename = "ln")]
    NaturalLog,
    /// Photographic stops; one stop is a factor of two.
    #[serde(rename = "stops")]
    Stops,
}

impl ExposureUnit {
    pub fn to_natural_log(self, ev: f64) -> f64 {
        match self {
            ExposureUnit::NaturalLog => ev,
            ExposureUnit::Stops => ev * std::f64::consts::LN_2,
        }
    }
}

/// Image kinds that can form an exposure stack.
pub trait StackImage: Raster + Clone + Send + Sync {}
impl StackImage for LdrImage {}
impl StackImage for RelaxedImage {}

/// Aligned images of one scene at increasing exposure.
///
/// `evs` are always stored in natural-log units; stops are converted on
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureStack<I = LdrImage> {
    images: Vec<I>,
    evs: Vec<f64>,
}

impl<I: StackImage> ExposureStack<I> {
    pub fn new(images: Vec<I>, evs: Vec<f64>, unit: ExposureUnit) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::invalid("exposure stack is empty"));
        }
        if images.len() != evs.len() {
            return Err(Error::invalid(format!(
                "{} images but {} exposure values",
                images.len(),
                evs.len()
            )));
        }
        let (w, h) = (images[0].width(), images[0].height());
        if let Some(j) = images.iter().position(|im| im.width() != w || im.height() != h) {
            return Err(Error::Validation(format!(
                "shape mismatch: image {j} is {}x{}, image 0 is {w}x{h}",
                images[j].width(),
                images[j].height()
            )));
        }
        let evs: Vec<f64> = evs.into_iter().map(|e| unit.to_natural_log(e)).collect();
        if let Some(j) = evs.iter().position(|e| !e.is_finite()) {
            return Err(Error::invalid(format!("exposure value {j} is not finite")));
        }
        if let Some(j) = evs.windows(2).position(|p| p[1] <= p[0]) {
            return Err(Error::Validation(format!(
                "exposure values must be strictly increasing (entry {} <= entry {j})",
                j + 1
            )));
        }
        Ok(Self { images, evs })
    }

    pub fn images(&self) -> &[I] {
        &self.images
    }

    pub fn images_mut(&mut self) -> &mut [I] {
        &mut self.images
    }

    pub fn evs(&self) -> &[f64] {
        &self.evs
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn width(&self) -> usize {
        self.images[0].width()
    }

    pub fn height(&self) -> usize {
        self.images[0].height()
    }

    /// Samples per image (`width * height * 3`).
    pub fn samples_per_image(&self) -> usize {
        self.images[0].len()
    }

    /// Same images, every EV shifted by `c`.
    pub fn with_shifted_evs(&self, c: f64) -> Self {
        Self {
            images: self.images.clone(),
            evs: self.evs.iter().map(|e| e + c).collect(),
        }
    }
}

impl ExposureStack<LdrImage> {
    pub fn to_relaxed(&self) -> ExposureStack<RelaxedImage> {
        ExposureStack {
            images: self.images.iter().map(LdrImage::to_relaxed).collect(),
            evs: self.evs.clone(),
        }
    }
}

impl ExposureStack<RelaxedImage> {
    pub fn quantized(&self) -> ExposureStack<LdrImage> {
        ExposureStack {
            images: self.images.iter().map(quantize).collect(),
            evs: self.evs.clone(),
        }
    }
}
