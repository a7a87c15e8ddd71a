use super::inner::{back_projection, InnerMethod, QuadraticSolve};
use super::trace::{grad_settled, Guard, RunReport, Tracker};
use super::{initial_point, Objective, SolverParams};
use crate::denoise::{tikhonov_symbol, Denoiser};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::operators::DegradationModel;

/// Fixed-point iteration: `x_k` solves
/// `(H^T H / sigma^2 + lambda I) x = H^T y / sigma^2 + lambda f(x_{k-1})`.
/// One denoiser call per iteration.
pub fn solve_fp(
    y: &Image,
    model: &DegradationModel,
    params: &SolverParams,
    engine: &dyn Denoiser,
    ground_truth: Option<&Image>,
) -> Result<RunReport> {
    params.validate()?;
    let obj = Objective::new(y, model, engine, params.lambda, params.sigma);
    let hty = back_projection(model, y, params.sigma)?;
    let solve = QuadraticSolve {
        model,
        sigma: params.sigma,
        shift: params.lambda,
        iters: params.inner_iters_m1,
        method: InnerMethod::MinimalResidual,
        mode: params.inner_solve,
    };

    let mut x = initial_point(y, model, &params.init)?;
    let mut eval = obj.evaluate(&x)?;
    let mut tracker = Tracker::new(ground_truth, Guard::EnergyRise);
    tracker.record(&x, eval.energy, eval.gradient.norm())?;

    for _ in 0..params.outer_iters {
        let mut b = hty.clone();
        b.axpy(params.lambda, &eval.denoised);
        x = solve.run(&b, &x)?;
        eval = obj.evaluate(&x)?;
        let g = eval.gradient.norm();
        tracker.record(&x, eval.energy, g)?;
        if grad_settled(params.grad_tol, tracker.initial_grad_norm(), g) {
            break;
        }
    }
    Ok(tracker.finish(x, None))
}

/// Spectral norm of `(H^T H / sigma^2 + lambda I)^{-1} lambda W` for the
/// Tikhonov engine `W`, from Fourier symbols. Below 1 means the fixed-point
/// map contracts.
pub fn fp_contraction_bound(
    model: &DegradationModel,
    width: usize,
    height: usize,
    lambda: f64,
    sigma: f64,
    sigma_f: f64,
    reg_weight: f64,
) -> Result<f64> {
    if !model.is_circulant() {
        return Err(Error::Unsupported("contraction bound needs a circulant model".into()));
    }
    let inv_var = 1.0 / (sigma * sigma);
    let h = model.psf.gain_sq(width, height);
    let w = tikhonov_symbol(width, height, sigma_f, reg_weight);
    Ok(h.iter()
        .zip(&w)
        .map(|(g, wk)| lambda * wk / (g * inv_var + lambda))
        .fold(0.0, f64::max))
}
