//! Plug-and-Play ADMM: the v-update is a plain denoiser call at level
//! `sigma_f(k) = sqrt(lambda / beta_k)` with the growing penalty
//! `beta_k = alpha^k beta0`.
//!
//! The x-update is the one RED's ADMM uses; only the v-update and the
//! schedule differ.

use crate::denoise::{rescale_noise_level, Denoiser, ZeroEngine};
use crate::error::{contract, Result};
use crate::image::Image;
use crate::operators::DegradationModel;
use crate::red::inner::{back_projection, InnerMethod, QuadraticSolve};
use crate::red::trace::{Guard, Tracker};
use crate::red::{initial_point, Init, InnerSolve, Objective, RunReport, Schedule};

#[derive(Clone, Debug, PartialEq)]
pub struct P3Params {
    pub outer_iters: usize,
    pub alpha: f64,
    pub beta0: f64,
    pub lambda: f64,
    /// Measurement noise level.
    pub sigma: f64,
    pub inner_iters_m1: usize,
    pub init: Init,
    pub inner_solve: InnerSolve,
}

impl P3Params {
    pub fn new(beta0: f64, lambda: f64, sigma: f64) -> Self {
        Self {
            outer_iters: 200,
            alpha: 1.02,
            beta0,
            lambda,
            sigma,
            inner_iters_m1: 200,
            init: Init::Observation,
            inner_solve: InnerSolve::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta0", self.beta0), ("lambda", self.lambda), ("sigma", self.sigma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(contract(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(contract(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        if self.outer_iters == 0 || self.inner_iters_m1 == 0 {
            return Err(contract("iteration counts must be >= 1"));
        }
        Ok(())
    }

    /// `beta_k` for `k = 0..outer_iters`.
    pub fn beta(&self, k: usize) -> f64 {
        self.alpha.powi(k as i32) * self.beta0
    }

    pub fn sigma_f(&self, k: usize) -> f64 {
        (self.lambda / self.beta(k)).sqrt()
    }

    pub fn schedule(&self) -> Schedule {
        let ks = 0..self.outer_iters;
        Schedule {
            beta: ks.clone().map(|k| self.beta(k)).collect(),
            sigma_f: ks.map(|k| self.sigma_f(k)).collect(),
        }
    }
}

/// The Plug-and-Play v-update: denoise `z = x + u` at level `sqrt(lambda / beta)`.
pub fn p3_v_step(engine: &dyn Denoiser, z: &Image, lambda: f64, beta: f64) -> Image {
    rescale_noise_level(engine, (lambda / beta).sqrt(), z)
}

/// Runs all `outer_iters` iterations; there is no convergence test.
///
/// `energy_trace` holds the data term `|Hx - y|^2 / (2 sigma^2)` and
/// `grad_norm_trace` the split gap `|x - v|`, since no objective exists.
/// With a ground truth the report also carries the best-PSNR iterate.
pub fn solve_p3(
    y: &Image,
    model: &DegradationModel,
    params: &P3Params,
    engine: &dyn Denoiser,
    ground_truth: Option<&Image>,
) -> Result<RunReport> {
    params.validate()?;
    let fidelity = Objective::new(y, model, &ZeroEngine, 1.0, params.sigma);
    let hty = back_projection(model, y, params.sigma)?;

    let mut x = initial_point(y, model, &params.init)?;
    let mut v = x.clone();
    let mut u = Image::zeros_like(&x);
    let mut tracker = Tracker::new(ground_truth, Guard::FiniteOnly);
    tracker.record(&x, fidelity.data_term(&x)?, 0.0)?;

    for k in 0..params.outer_iters {
        let beta = params.beta(k);
        let mut b = hty.clone();
        b.axpy(beta, &(&v - &u));
        let x_update = QuadraticSolve {
            model,
            sigma: params.sigma,
            shift: beta,
            iters: params.inner_iters_m1,
            method: InnerMethod::SteepestDescent,
            mode: params.inner_solve,
        };
        x = x_update.run(&b, &x)?;
        v = p3_v_step(engine, &(&x + &u), params.lambda, beta);
        u += &(&x - &v);
        tracker.record(&x, fidelity.data_term(&x)?, (&x - &v).norm())?;
    }
    Ok(tracker.finish(x, Some(params.schedule())))
}
