//! Simple engines with known Jacobians, for oracles and analysis.

use nalgebra::{DMatrix, DVector};

use super::Denoiser;
use crate::error::{contract, Result};
use crate::image::Image;

/// `f(x) = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroEngine;

impl Denoiser for ZeroEngine {
    fn denoise(&self, x: &Image) -> Image {
        Image::zeros_like(x)
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

/// `f(x) = x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityEngine;

impl Denoiser for IdentityEngine {
    fn denoise(&self, x: &Image) -> Image {
        x.clone()
    }
    fn name(&self) -> String {
        "identity".into()
    }
}

/// `f(x) = c x`.
#[derive(Clone, Copy, Debug)]
pub struct ScalingEngine(pub f64);

impl Denoiser for ScalingEngine {
    fn denoise(&self, x: &Image) -> Image {
        x.scale(self.0)
    }
    fn name(&self) -> String {
        format!("scale({})", self.0)
    }
}

/// `f(x) = W x` for an explicit matrix over row-major pixels of a fixed shape.
#[derive(Clone, Debug)]
pub struct DenseLinearEngine {
    width: usize,
    height: usize,
    matrix: DMatrix<f64>,
}

impl DenseLinearEngine {
    pub fn new(width: usize, height: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let n = width * height;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(contract(format!(
                "matrix is {}x{}, expected {n}x{n} for a {width}x{height} image",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { width, height, matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl Denoiser for DenseLinearEngine {
    /// Panics if `x` does not have the engine's shape.
    fn denoise(&self, x: &Image) -> Image {
        assert_eq!(x.dims(), (self.width, self.height), "dense engine shape mismatch");
        let v = &self.matrix * DVector::from_column_slice(x.data());
        Image::from_raw(self.width, self.height, v.as_slice().to_vec())
    }
    fn name(&self) -> String {
        format!("dense({}x{})", self.width, self.height)
    }
}
