//! Dense row-major 2D grids.
//!
//! One type carries every raster in the pipeline (mask, aerial image, resist
//! pattern, level set); the role is implied by where the value flows.

use crate::error::{Error, Result};

/// Smallest accepted grid edge, in pixels.
pub const MIN_EDGE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    pixel_size: f64,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, pixel_size: f64, data: Vec<f64>) -> Result<Self> {
        if width < MIN_EDGE || height < MIN_EDGE {
            return Err(Error::param(
                "shape",
                format!("{width}x{height} is below the {MIN_EDGE}x{MIN_EDGE} minimum"),
            ));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::param("pixel_size", format!("{pixel_size} must be > 0")));
        }
        if data.len() != width * height {
            return Err(Error::param(
                "data",
                format!("length {} != {width}x{height}", data.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            pixel_size,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, pixel_size: f64, value: f64) -> Result<Self> {
        Self::new(width, height, pixel_size, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize, pixel_size: f64) -> Result<Self> {
        Self::filled(width, height, pixel_size, 0.0)
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_size: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, pixel_size, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// New field with the same geometry and different values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.width, self.height, self.pixel_size, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn ensure_same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
