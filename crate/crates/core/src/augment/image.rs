use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// Small image with pixel values in `[0, 1]`, stored row-major with
/// interleaved channels: index `(y * width + x) * channels + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::param(format!("images have 1 or 3 channels, got {channels}")));
        }
        if height * width * channels != data.len() {
            return Err(Error::dim(format!(
                "{height}x{width}x{channels} image needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, channels: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c).clamp(0.0, 1.0));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::from_fn(height, width, channels, |_, _, _| value)
    }

    // Pixels produced inside the engine are clamped on the way in.
    pub(crate) fn from_clamped(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self {
            height,
            width,
            channels,
            data,
        }
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
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        (self.height, self.width, self.channels) == (other.height, other.width, other.channels)
    }

    /// Values as a `height × (width·channels)` matrix, the layout of NPY fixtures.
    pub fn to_matrix(&self) -> RealMatrix {
        RealMatrix::from_parts_unchecked(self.height, self.width * self.channels, self.data.clone())
    }

    pub fn from_matrix(m: &RealMatrix, channels: usize) -> Result<Self> {
        if channels == 0 || !m.cols().is_multiple_of(channels) {
            return Err(Error::dim(format!(
                "{} columns do not split into {channels} channels",
                m.cols()
            )));
        }
        Self::new(m.rows(), m.cols() / channels, channels, m.as_slice().to_vec())
    }

    /// 8-bit encoding, `round(v·255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    pub fn from_u8(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }
}
