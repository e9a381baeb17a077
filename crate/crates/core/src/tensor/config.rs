use serde::{Deserialize, Serialize};

use super::index::MultiIndex;
use crate::{Error, Result};

/// How the convolution output is cropped after the full recursion.
///
/// The uncropped output of [`super::convolve`] lives on the same grid as
/// the (stride-divided) input, with reads left of the support treated as
/// zeros. Cropping then restricts the support per mode; see
/// [`super::crop_for_padding`] for the exact intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Keep everything.
    Full,
    /// Crop to `[floor(r/2), N - ceil(r/2)]` per direction.
    Same,
    /// Crop to `[r, N - r]` per direction.
    None,
}

/// Stride, dilation, and padding of a convolutional layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvConfig {
    stride: MultiIndex,
    dilation: MultiIndex,
    padding: Padding,
}

impl ConvConfig {
    /// Stride 1, dilation 1, full padding. Panics if `dim == 0`.
    pub fn unit(dim: usize) -> Self {
        ConvConfig {
            stride: MultiIndex::ones(dim),
            dilation: MultiIndex::ones(dim),
            padding: Padding::Full,
        }
    }

    pub fn new(stride: MultiIndex, dilation: MultiIndex, padding: Padding) -> Result<Self> {
        check_positive(&stride, "stride")?;
        check_positive(&dilation, "dilation")?;
        if stride.dim() != dilation.dim() {
            return Err(Error::DimMismatch(format!(
                "stride {} and dilation {} differ in dimension",
                stride, dilation
            )));
        }
        Ok(ConvConfig { stride, dilation, padding })
    }

    pub fn with_stride(mut self, stride: MultiIndex) -> Result<Self> {
        check_positive(&stride, "stride")?;
        if stride.dim() != self.dim() {
            return Err(Error::DimMismatch(format!(
                "stride {} does not match config dimension {}",
                stride,
                self.dim()
            )));
        }
        self.stride = stride;
        Ok(self)
    }

    pub fn with_dilation(mut self, dilation: MultiIndex) -> Result<Self> {
        check_positive(&dilation, "dilation")?;
        if dilation.dim() != self.dim() {
            return Err(Error::DimMismatch(format!(
                "dilation {} does not match config dimension {}",
                dilation,
                self.dim()
            )));
        }
        self.dilation = dilation;
        Ok(self)
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn dim(&self) -> usize {
        self.stride.dim()
    }

    pub fn stride(&self) -> &MultiIndex {
        &self.stride
    }

    pub fn dilation(&self) -> &MultiIndex {
        &self.dilation
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }
}

fn check_positive(idx: &MultiIndex, what: &str) -> Result<()> {
    if idx.as_slice().contains(&0) {
        return Err(Error::Shape(format!("{what} entries must be at least 1, got {idx}")));
    }
    Ok(())
}
