//! Dense single-channel images on the 0..255 intensity scale.
//!
//! An [`Image`] doubles as the vector type of every solver: iterates,
//! residuals, dual variables and perturbations are all images, so the
//! arithmetic here is the vector algebra of the whole crate.

use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use crate::error::{contract, Result};

/// Row-major grid of real intensities, nominally in `[0, 255]`.
///
/// Solver iterates may leave the nominal range; file export clamps.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Wraps row-major `data`. Fails if the length does not match or a value
    /// is not finite.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(contract(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(contract(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(contract(format!("non-finite value at index {pos}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn zeros_like(other: &Image) -> Self {
        Self::zeros(other.width, other.height)
    }

    /// Builds an image from `f(x, y)` where `x` is the column.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Internal constructor for buffers whose shape is known to be right.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
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
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// Sample with periodic wraparound on both axes.
    #[inline]
    pub fn get_periodic(&self, x: isize, y: isize) -> f64 {
        let xw = x.rem_euclid(self.width as isize) as usize;
        let yw = y.rem_euclid(self.height as isize) as usize;
        self.data[yw * self.width + xw]
    }

    /// Sample with edge replication.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same_dims(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(contract(format!(
                "{what}: dimension mismatch {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_raw(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination; panics on a shape mismatch.
    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
        assert!(self.same_dims(other), "zip_map on images of different dimensions");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Image::from_raw(self.width, self.height, data)
    }

    pub fn scale(&self, c: f64) -> Image {
        self.map(|v| c * v)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Image) {
        assert!(self.same_dims(other), "axpy on images of different dimensions");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn dot(&self, other: &Image) -> f64 {
        assert!(self.same_dims(other), "dot on images of different dimensions");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Clamp every value into `[lo, hi]` in place.
    pub fn clamp_in_place(&mut self, lo: f64, hi: f64) {
        for v in &mut self.data {
            *v = v.clamp(lo, hi);
        }
    }

    /// Copy of the `w x h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(contract(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok(Image::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y)))
    }
}

impl Add for &Image {
    type Output = Image;
    fn add(self, rhs: &Image) -> Image {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Image {
    type Output = Image;
    fn sub(self, rhs: &Image) -> Image {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<&Image> for f64 {
    type Output = Image;
    fn mul(self, rhs: &Image) -> Image {
        rhs.scale(self)
    }
}

impl AddAssign<&Image> for Image {
    fn add_assign(&mut self, rhs: &Image) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Image> for Image {
    fn sub_assign(&mut self, rhs: &Image) {
        self.axpy(-1.0, rhs);
    }
}
