//! Empirical checks of a denoiser against homogeneity (`f(cx) = c f(x)`)
//! and strong passivity (Jacobian spectral radius at most 1).

use crate::denoise::Denoiser;
use crate::error::{contract, Result};
use crate::image::Image;
use crate::operators::gaussian_image;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 0.05) {
        return Err(contract(format!("epsilon must lie in (0, 0.05], got {epsilon}")));
    }
    Ok(())
}

/// Sample standard deviation of `f((1+eps) x) - (1+eps) f(x)` over pixels.
pub fn homogeneity_deviation(engine: &dyn Denoiser, x: &Image, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let c = 1.0 + epsilon;
    let diff = engine.denoise(&x.scale(c)).zip_map(&engine.denoise(x), |a, b| a - c * b);
    Ok(sample_std(diff.data()))
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|a| (a - mean) * (a - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Finite-difference estimate of `grad f(x) x`, i.e. `(f(x + eps x) - f(x)) / eps`.
/// Homogeneous engines return `f(x)`.
pub fn directional_derivative(engine: &dyn Denoiser, x: &Image, epsilon: f64) -> Result<Image> {
    check_epsilon(epsilon)?;
    let fx = engine.denoise(x);
    Ok(directional_derivative_with(engine, x, &fx, epsilon))
}

fn directional_derivative_with(engine: &dyn Denoiser, x: &Image, fx: &Image, epsilon: f64) -> Image {
    let shifted = engine.denoise(&x.scale(1.0 + epsilon));
    shifted.zip_map(fx, |a, b| (a - b) / epsilon)
}

/// `|grad f(x) x - f(x)| / |f(x)|` from [`directional_derivative`].
pub fn directional_gap(engine: &dyn Denoiser, x: &Image, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let fx = engine.denoise(x);
    let est = directional_derivative_with(engine, x, &fx, epsilon);
    let denom = fx.norm();
    let gap = (&est - &fx).norm();
    Ok(if denom > 0.0 { gap / denom } else { gap })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerMethodParams {
    pub max_iters: usize,
    /// Relative change of the estimate that counts as settled.
    pub tol: f64,
    pub seed: u64,
    /// Euclidean norm of the perturbation `h` fed to the engine.
    pub perturbation_scale: f64,
}

impl Default for PowerMethodParams {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-5,
            seed: 0,
            perturbation_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PassivityEstimate {
    pub estimate: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// The engine did not respond to the perturbation; `estimate` is 0.
    pub degenerate: bool,
    /// Estimate after every iteration.
    pub history: Vec<f64>,
}

const SETTLED_RUN: usize = 3;

/// Power iteration on the Jacobian of `f` at `x`, using
/// `d = (f(x + s h) - f(x)) / s` as the Jacobian-vector product.
///
/// `h` starts as a seeded Gaussian image of unit norm and is renormalized
/// every step; the estimate is the Rayleigh quotient `d^T h`. Stops once the
/// estimate's relative change stays below `tol` for three iterations in a row.
pub fn passivity_power_method(
    engine: &dyn Denoiser,
    x: &Image,
    params: &PowerMethodParams,
) -> Result<PassivityEstimate> {
    if params.max_iters == 0 {
        return Err(contract("power method needs max_iters >= 1"));
    }
    if !(params.tol > 0.0 && params.perturbation_scale > 0.0) {
        return Err(contract("power method tol and perturbation scale must be positive"));
    }
    let s = params.perturbation_scale;
    let fx = engine.denoise(x);
    let mut h = gaussian_image(x.width(), x.height(), params.seed);
    let n0 = h.norm();
    h = h.scale(1.0 / n0);

    let mut estimate = f64::NAN;
    let mut history = Vec::new();
    let mut settled = 0;
    for it in 1..=params.max_iters {
        let mut probe = x.clone();
        probe.axpy(s, &h);
        let d = engine.denoise(&probe).zip_map(&fx, |a, b| (a - b) / s);
        let dn = d.norm();
        if dn == 0.0 {
            return Ok(PassivityEstimate {
                estimate: 0.0,
                iterations_used: it,
                converged: false,
                degenerate: true,
                history,
            });
        }
        let next = d.dot(&h);
        let change = (next - estimate).abs() / next.abs().max(f64::MIN_POSITIVE);
        estimate = next;
        history.push(next);
        h = d.scale(1.0 / dn);
        settled = if change < params.tol { settled + 1 } else { 0 };
        if settled >= SETTLED_RUN {
            return Ok(PassivityEstimate {
                estimate,
                iterations_used: it,
                converged: true,
                degenerate: false,
                history,
            });
        }
    }
    Ok(PassivityEstimate {
        estimate,
        iterations_used: params.max_iters,
        converged: false,
        degenerate: false,
        history,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyReport {
    pub homogeneity_std: f64,
    pub passivity_estimate: f64,
    pub directional_gap: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub degenerate: bool,
}

/// Runs the three checks with a shared `epsilon`.
pub fn certify(
    engine: &dyn Denoiser,
    x: &Image,
    epsilon: f64,
    power: &PowerMethodParams,
) -> Result<PropertyReport> {
    let homogeneity_std = homogeneity_deviation(engine, x, epsilon)?;
    let gap = directional_gap(engine, x, epsilon)?;
    let pm = passivity_power_method(engine, x, power)?;
    Ok(PropertyReport {
        homogeneity_std,
        passivity_estimate: pm.estimate,
        directional_gap: gap,
        iterations_used: pm.iterations_used,
        converged: pm.converged,
        degenerate: pm.degenerate,
    })
}
