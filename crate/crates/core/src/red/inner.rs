//! Quadratic subproblems `(H^T H / sigma^2 + c I) z = b` shared by the
//! ADMM x-update, the fixed-point update and the Plug-and-Play x-update.

use super::InnerSolve;
use crate::error::Result;
use crate::image::Image;
use crate::operators::{solve_normal_fft, DegradationModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum InnerMethod {
    /// Gradient steps with exact line search: `e = Az - b`, `mu = e'e / e'Ae`.
    SteepestDescent,
    /// Minimal-residual steps: `r = Az - b`, `mu = r'Ar / |Ar|^2`.
    MinimalResidual,
}

pub(crate) struct QuadraticSolve<'a> {
    pub model: &'a DegradationModel,
    pub sigma: f64,
    pub shift: f64,
    pub iters: usize,
    pub method: InnerMethod,
    pub mode: InnerSolve,
}

impl QuadraticSolve<'_> {
    /// Solves for `z` starting from `z0`. The iterative route projects every
    /// step onto `[0, 255]`; the FFT route is exact and unprojected.
    pub fn run(&self, b: &Image, z0: &Image) -> Result<Image> {
        if self.mode == InnerSolve::Auto && self.model.is_circulant() {
            return solve_normal_fft(self.model, b, self.shift, self.sigma);
        }
        let a = |z: &Image| self.model.normal_op(z, self.sigma, self.shift);
        let mut z = z0.clone();
        for _ in 0..self.iters {
            let r = &a(&z)? - b;
            let ar = a(&r)?;
            let mu = match self.method {
                InnerMethod::SteepestDescent => r.norm_sq() / r.dot(&ar),
                InnerMethod::MinimalResidual => r.dot(&ar) / ar.norm_sq(),
            };
            if !mu.is_finite() {
                // zero residual: already solved
                break;
            }
            z.axpy(-mu, &r);
            z.clamp_in_place(0.0, 255.0);
        }
        Ok(z)
    }
}

/// `H^T y / sigma^2`, the constant part of every right-hand side.
pub(crate) fn back_projection(model: &DegradationModel, y: &Image, sigma: f64) -> Result<Image> {
    Ok(model.adjoint(y)?.scale(1.0 / (sigma * sigma)))
}
