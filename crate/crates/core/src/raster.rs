//! In-memory rasters and label masks.

use crate::error::{Error, Result};

pub const LABEL_ENVIRONMENT: u8 = 0;
pub const LABEL_INFORMAL: u8 = 1;
pub const LABEL_UNLABELED: u8 = 255;

/// Class names in label order.
pub fn default_class_names() -> Vec<String> {
    vec!["environment".to_string(), "informal".to_string()]
}

/// `height × width × bands` image; values are stored pixel-interleaved, so
/// each pixel's spectrum is one contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct MultispectralRaster {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f32>,
    pub nodata: Option<f32>,
    pub band_names: Option<Vec<String>>,
}

impl MultispectralRaster {
    /// `data` is pixel-interleaved: `data[(row * width + col) * bands + band]`.
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(Error::EmptyRaster);
        }
        if data.len() != width * height * bands {
            return Err(Error::dim(format!(
                "raster {width}x{height}x{bands} needs {} values, got {}",
                width * height * bands,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(MultispectralRaster {
            width,
            height,
            bands,
            data,
            nodata: None,
            band_names: None,
        })
    }

    pub fn with_nodata(mut self, nodata: Option<f32>) -> Self {
        self.nodata = nodata;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn spectrum(&self, pixel: usize) -> &[f32] {
        &self.data[pixel * self.bands..(pixel + 1) * self.bands]
    }

    pub fn spectrum_mut(&mut self, pixel: usize) -> &mut [f32] {
        &mut self.data[pixel * self.bands..(pixel + 1) * self.bands]
    }

    /// True when any band of the pixel equals the nodata value.
    #[inline]
    pub fn is_nodata(&self, pixel: usize) -> bool {
        match self.nodata {
            Some(nd) => self.spectrum(pixel).contains(&nd),
            None => false,
        }
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Per-pixel class labels; `255` marks pixels without a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster);
        }
        if data.len() != width * height {
            return Err(Error::dim(format!(
                "mask {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|&v| !is_mask_value(v)) {
            return Err(Error::IllegalMaskValue {
                index,
                value: data[index],
            });
        }
        Ok(LabelMask {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        LabelMask::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn get(&self, pixel: usize) -> u8 {
        self.data[pixel]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn same_shape(&self, other: &LabelMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Swaps the two class labels, leaving unlabeled pixels alone.
    pub fn flipped(&self) -> LabelMask {
        let data = self
            .data
            .iter()
            .map(|&v| match v {
                LABEL_ENVIRONMENT => LABEL_INFORMAL,
                LABEL_INFORMAL => LABEL_ENVIRONMENT,
                other => other,
            })
            .collect();
        LabelMask {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

#[inline]
pub fn is_mask_value(v: u8) -> bool {
    v == LABEL_ENVIRONMENT || v == LABEL_INFORMAL || v == LABEL_UNLABELED
}
