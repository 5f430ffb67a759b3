//! Image-side preprocessing: multi-scale rescaling, the two feature-map size
//! adapters, PGM/PPM decoding and a deterministic stand-in encoder.

mod pnm;
mod resize;
mod toy;

pub use pnm::{read_pnm, write_pnm};
pub use resize::{adaptive_max_pool, bilinear_upsample, rescale_bilinear, scaled_dim};
pub use toy::{cell_statistics, toy_encode, toy_encode_text, ScaleFeatures, GRID};

use crate::error::{Error, Result};

/// Interleaved (row, column, channel) pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!("channels must be 1 or 3, got {channels}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::shape("Image::new", height * width * channels, pixels.len()));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }
}

/// The original image with its 1.5x and 0.5x rescaled versions.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleImage {
    pub i_15: Image,
    pub i_10: Image,
    pub i_05: Image,
}

impl MultiScaleImage {
    pub fn from_image(i_10: Image) -> Result<Self> {
        Ok(Self {
            i_15: rescale_bilinear(&i_10, 1.5)?,
            i_05: rescale_bilinear(&i_10, 0.5)?,
            i_10,
        })
    }
}

/// Channel-major feature map (`c`, `h`, `w`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument("feature map dimensions must be positive".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape("FeatureMap::new", channels * height * width, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("feature map has non-finite entries".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}
