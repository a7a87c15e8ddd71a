use super::trace::{grad_settled, Guard, RunReport, Tracker};
use super::{initial_point, Objective, SolverParams};
use crate::denoise::Denoiser;
use crate::error::Result;
use crate::image::Image;
use crate::operators::DegradationModel;

/// Steepest descent with the fixed step `step_scale / (1/sigma^2 + lambda)`.
/// One denoiser call per iteration.
pub fn solve_sd(
    y: &Image,
    model: &DegradationModel,
    params: &SolverParams,
    engine: &dyn Denoiser,
    ground_truth: Option<&Image>,
) -> Result<RunReport> {
    params.validate()?;
    let obj = Objective::new(y, model, engine, params.lambda, params.sigma);
    let mu = params.step_scale / (1.0 / (params.sigma * params.sigma) + params.lambda);

    let mut x = initial_point(y, model, &params.init)?;
    let mut eval = obj.evaluate(&x)?;
    let mut tracker = Tracker::new(ground_truth, Guard::EnergyRise);
    tracker.record(&x, eval.energy, eval.gradient.norm())?;

    for _ in 0..params.outer_iters {
        x.axpy(-mu, &eval.gradient);
        eval = obj.evaluate(&x)?;
        let g = eval.gradient.norm();
        tracker.record(&x, eval.energy, g)?;
        if grad_settled(params.grad_tol, tracker.initial_grad_norm(), g) {
            break;
        }
    }
    Ok(tracker.finish(x, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{DenoiserSpec, IdentityEngine, ZeroEngine};
    use crate::error::Error;
    use crate::operators::gaussian_image;
    use crate::red::{Init, Scheme};

    #[test]
    fn identity_engine_converges_to_observation() {
        let y = gaussian_image(8, 8, 1).scale(20.0).map(|v| v + 100.0);
        let model = DegradationModel::identity();
        let mut p = SolverParams::new(Scheme::Sd, 0.1, 2.0);
        p.init = Init::Custom(Image::filled(8, 8, 0.0));
        p.outer_iters = 300;
        let r = solve_sd(&y, &model, &p, &IdentityEngine, None).unwrap();
        assert!((&r.final_image - &y).norm() < 1e-8 * y.norm());
        assert!(r.grad_norm_trace.last().unwrap() < &(1e-8 * r.grad_norm_trace[0]));
    }

    #[test]
    fn zero_engine_reaches_ridge_minimizer() {
        let y = gaussian_image(8, 8, 2).scale(20.0).map(|v| v + 100.0);
        let model = DegradationModel::identity();
        let (lambda, sigma) = (0.05, 3.0);
        let mut p = SolverParams::new(Scheme::Sd, lambda, sigma);
        p.outer_iters = 200;
        let r = solve_sd(&y, &model, &p, &ZeroEngine, None).unwrap();
        let target = y.scale(1.0 / (1.0 + lambda * sigma * sigma));
        assert!((&r.final_image - &target).norm() < 1e-6 * target.norm());
        assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }

    #[test]
    fn grad_tol_stops_early() {
        let y = gaussian_image(8, 8, 3).scale(20.0);
        let model = DegradationModel::identity();
        let mut p = SolverParams::new(Scheme::Sd, 0.05, 3.0);
        p.grad_tol = Some(1e-3);
        let r = solve_sd(&y, &model, &p, &ZeroEngine, None).unwrap();
        assert!(r.iterations_run < p.outer_iters);
        assert_eq!(r.energy_trace.len(), r.iterations_run + 1);
    }

    #[test]
    fn oversized_step_is_caught_by_the_guard() {
        let y = gaussian_image(8, 8, 4).scale(20.0);
        let model = DegradationModel::identity();
        let mut p = SolverParams::new(Scheme::Sd, 0.05, 3.0);
        p.step_scale = 3.0;
        let err = solve_sd(&y, &model, &p, &ZeroEngine, None).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn traces_include_psnr_when_truth_given() {
        let gt = gaussian_image(8, 8, 5).scale(20.0).map(|v| v + 100.0);
        let y = crate::operators::add_gaussian_noise(&gt, 5.0, 6);
        let mut p = SolverParams::new(Scheme::Sd, 0.05, 5.0);
        p.outer_iters = 20;
        let e = DenoiserSpec::tikhonov(1.0, 5.0).unwrap();
        let r = solve_sd(&y, &DegradationModel::identity(), &p, &e, Some(&gt)).unwrap();
        assert_eq!(r.psnr_trace.unwrap().len(), 21);
        assert!(r.best.is_some());
    }
}
