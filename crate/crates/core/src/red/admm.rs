use super::inner::{back_projection, InnerMethod, QuadraticSolve};
use super::trace::{grad_settled, Guard, RunReport, Tracker};
use super::{initial_point, Objective, SolverParams};
use crate::denoise::Denoiser;
use crate::error::Result;
use crate::image::Image;
use crate::operators::DegradationModel;

/// One fixed-point step for the RED v-subproblem
/// `min_v (lambda/2) v^T (v - f(v)) + (beta/2) |v - z|^2`, `z = x + u`:
/// `v = (lambda f(v_prev) + beta z) / (beta + lambda)`.
pub fn red_v_step(engine: &dyn Denoiser, v_prev: &Image, z: &Image, lambda: f64, beta: f64) -> Image {
    let fv = engine.denoise(v_prev);
    let inv = 1.0 / (beta + lambda);
    fv.zip_map(z, |a, b| (lambda * a + beta * b) * inv)
}

/// ADMM on the split `x = v`: data-proximal x-update, `inner_iters_m2`
/// fixed-point steps for v, scaled dual update `u += x - v`.
pub fn solve_admm(
    y: &Image,
    model: &DegradationModel,
    params: &SolverParams,
    engine: &dyn Denoiser,
    ground_truth: Option<&Image>,
) -> Result<RunReport> {
    params.validate()?;
    let obj = Objective::new(y, model, engine, params.lambda, params.sigma);
    let (lambda, beta) = (params.lambda, params.beta);
    let hty = back_projection(model, y, params.sigma)?;
    let x_update = QuadraticSolve {
        model,
        sigma: params.sigma,
        shift: beta,
        iters: params.inner_iters_m1,
        method: InnerMethod::SteepestDescent,
        mode: params.inner_solve,
    };

    let mut x = initial_point(y, model, &params.init)?;
    let mut v = x.clone();
    let mut u = Image::zeros_like(&x);
    let mut tracker = Tracker::new(ground_truth, Guard::EnergyRise);
    let eval = obj.evaluate(&x)?;
    tracker.record(&x, eval.energy, eval.gradient.norm())?;

    for _ in 0..params.outer_iters {
        let mut b = hty.clone();
        b.axpy(beta, &(&v - &u));
        x = x_update.run(&b, &x)?;

        let z = &x + &u;
        for _ in 0..params.inner_iters_m2 {
            v = red_v_step(engine, &v, &z, lambda, beta);
        }
        u += &(&x - &v);

        let eval = obj.evaluate(&x)?;
        let g = eval.gradient.norm();
        tracker.record(&x, eval.energy, g)?;
        if grad_settled(params.grad_tol, tracker.initial_grad_norm(), g) {
            break;
        }
    }
    Ok(tracker.finish(x, None))
}
