use crate::error::{Error, Result};

/// Grayscale raster on the 0-255 intensity scale, row-major.
///
/// Values may leave `[0, 255]` after noise is added; they must stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: p / width.max(1),
                col: p % width.max(1),
            });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        assert!(pixels.iter().all(|v| v.is_finite()));
        Self {
            height,
            width,
            pixels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    /// Copy with every value clamped to `[0, 255]`.
    pub fn clipped(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|v| v.clamp(0.0, 255.0)).collect(),
        }
    }
}
