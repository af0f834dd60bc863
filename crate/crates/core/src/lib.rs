//! Differentiable multi-exposure HDR synthesis.
//!
//! The pipeline recovers an inverse camera response from a bracketed stack
//! ([`calibration`]), turns the tabulated response into a piece-wise linear
//! function with a defined derivative at every intensity ([`synthesis`]),
//! merges the stack into radiance and propagates loss gradients back to
//! every pixel of every exposure. Around that core sit the training losses
//! ([`objectives`]), the normalization and activation operators
//! ([`netops`]), tone mapping, quality metrics, file formats and a small
//! gradient-descent demonstrator ([`fit`]).

pub mod calibration;
pub mod error;
pub mod fit;
pub mod image;
pub mod io;
pub mod metrics;
pub mod netops;
pub mod objectives;
pub mod resize;
pub mod synthesis;
pub mod tonemap;

pub use crate::error::{Error, Result};
pub use crate::image::{
    luminance, quantize, ExposureStack, ExposureUnit, HdrImage, LdrImage, Raster, RelaxedImage,
    StackImage, CHANNELS,
};
