//! Dense 3-D feature tensor.

use crate::error::{Error, Result};

/// Feature map with `channels` planes of `height x width` f32 values.
///
/// Layout is channel-major: plane `c` is a contiguous row-major block, so
/// `values[(c * height + y) * width + x]` addresses `(c, y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f32>,
}

impl Tensor3 {
    /// Zero-filled tensor.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        debug_assert!(width >= 1 && height >= 1 && channels >= 1);
        Self {
            width,
            height,
            channels,
            values: vec![0.0; width * height * channels],
        }
    }

    /// Wraps an existing value buffer; the length must match the dimensions.
    pub fn from_values(width: usize, height: usize, channels: usize, values: Vec<f32>) -> Result<Self> {
        if width < 1 || height < 1 || channels < 1 {
            return Err(Error::InvalidInput("tensor dimensions must be >= 1".into()));
        }
        if values.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "tensor buffer has {} values, expected {} for {}x{}x{}",
                values.len(),
                width * height * channels,
                width,
                height,
                channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(width, height, channels)` in one call.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.values[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.values[(c * self.height + y) * self.width + x] = v;
    }

    /// Contiguous row-major plane of channel `c`.
    #[inline]
    pub fn plane(&self, c: usize) -> &[f32] {
        let len = self.width * self.height;
        &self.values[c * len..(c + 1) * len]
    }
}
