//! The RED objective
//! `E(x) = |Hx - y|^2 / (2 sigma^2) + (lambda/2) x^T (x - f(x))`,
//! its gradient `H^T(Hx - y)/sigma^2 + lambda (x - f(x))`, and three
//! minimizers: steepest descent, ADMM and fixed-point iteration.

mod admm;
mod fp;
pub(crate) mod inner;
mod sd;
pub(crate) mod trace;

pub use admm::{red_v_step, solve_admm};
pub use fp::{fp_contraction_bound, solve_fp};
pub use sd::solve_sd;
pub use trace::{BestIterate, RunReport, Schedule};

use crate::denoise::Denoiser;
use crate::error::{contract, Result};
use crate::image::Image;
use crate::operators::{bicubic_upscale, DegradationModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Sd,
    Admm,
    Fp,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// `x0 = y`; only valid without decimation.
    Observation,
    /// `x0` = bicubic upscale of `y` (equals `y` without decimation).
    BicubicUpscale,
    Custom(Image),
}

/// How the quadratic subproblems `(H^T H / sigma^2 + c I) z = b` are solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSolve {
    /// FFT when `H` is circulant, the iterative scheme otherwise.
    Auto,
    /// Always the projected iterative scheme with `inner_iters_m1` steps.
    Iterative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub lambda: f64,
    /// Measurement noise level.
    pub sigma: f64,
    pub outer_iters: usize,
    pub inner_iters_m1: usize,
    pub inner_iters_m2: usize,
    /// ADMM penalty.
    pub beta: f64,
    pub scheme: Scheme,
    pub init: Init,
    /// Steepest-descent step is `step_scale / (1/sigma^2 + lambda)`.
    pub step_scale: f64,
    /// Stop once `|grad E| / |grad E(x0)|` falls below this. Off by default.
    pub grad_tol: Option<f64>,
    pub inner_solve: InnerSolve,
}

impl SolverParams {
    pub fn new(scheme: Scheme, lambda: f64, sigma: f64) -> Self {
        Self {
            lambda,
            sigma,
            outer_iters: match scheme {
                Scheme::Sd => 1500,
                Scheme::Admm | Scheme::Fp => 200,
            },
            inner_iters_m1: 200,
            inner_iters_m2: 1,
            beta: 0.001,
            scheme,
            init: Init::Observation,
            step_scale: 1.0,
            grad_tol: None,
            inner_solve: InnerSolve::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("beta", self.beta),
            ("step_scale", self.step_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(contract(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("outer_iters", self.outer_iters),
            ("inner_iters_m1", self.inner_iters_m1),
            ("inner_iters_m2", self.inner_iters_m2),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(contract(format!("{name} must be >= 1")));
            }
        }
        if let Some(t) = self.grad_tol {
            if t.is_nan() || t <= 0.0 {
                return Err(contract(format!("grad_tol must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// The energy, tied to one problem instance.
#[derive(Clone, Copy)]
pub struct Objective<'a> {
    pub y: &'a Image,
    pub model: &'a DegradationModel,
    pub engine: &'a dyn Denoiser,
    pub lambda: f64,
    pub sigma: f64,
}

/// One evaluation of the objective at `x`, sharing a single denoiser call.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub energy: f64,
    pub gradient: Image,
    pub denoised: Image,
}

impl<'a> Objective<'a> {
    pub fn new(
        y: &'a Image,
        model: &'a DegradationModel,
        engine: &'a dyn Denoiser,
        lambda: f64,
        sigma: f64,
    ) -> Self {
        Self {
            y,
            model,
            engine,
            lambda,
            sigma,
        }
    }

    fn residual(&self, x: &Image) -> Result<Image> {
        let hx = self.model.apply(x)?;
        hx.check_same_dims(self.y, "observation")?;
        Ok(&hx - self.y)
    }

    pub fn data_term(&self, x: &Image) -> Result<f64> {
        Ok(self.residual(x)?.norm_sq() / (2.0 * self.sigma * self.sigma))
    }

    pub fn energy(&self, x: &Image) -> Result<f64> {
        Ok(self.evaluate(x)?.energy)
    }

    pub fn gradient(&self, x: &Image) -> Result<Image> {
        Ok(self.evaluate(x)?.gradient)
    }

    /// Energy and gradient from one denoiser activation.
    pub fn evaluate(&self, x: &Image) -> Result<Evaluation> {
        let r = self.residual(x)?;
        let fx = self.engine.denoise(x);
        let inv_var = 1.0 / (self.sigma * self.sigma);
        let denoise_residual = x - &fx;
        let energy = 0.5 * r.norm_sq() * inv_var + 0.5 * self.lambda * x.dot(&denoise_residual);
        let mut gradient = self.model.adjoint(&r)?.scale(inv_var);
        gradient.axpy(self.lambda, &denoise_residual);
        Ok(Evaluation {
            energy,
            gradient,
            denoised: fx,
        })
    }
}

pub fn red_energy(
    x: &Image,
    y: &Image,
    model: &DegradationModel,
    params: &SolverParams,
    engine: &dyn Denoiser,
) -> Result<f64> {
    Objective::new(y, model, engine, params.lambda, params.sigma).energy(x)
}

pub fn red_gradient(
    x: &Image,
    y: &Image,
    model: &DegradationModel,
    params: &SolverParams,
    engine: &dyn Denoiser,
) -> Result<Image> {
    Objective::new(y, model, engine, params.lambda, params.sigma).gradient(x)
}

/// The two residual-based priors and the term linking them:
/// `rho_q = 2 rho_l + symmetrization`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoDecomposition {
    /// `|x - f(x)|^2`
    pub rho_q: f64,
    /// `x^T (x - f(x)) / 2`
    pub rho_l: f64,
    /// `f(x)^T (f(x) - x)`
    pub symmetrization: f64,
}

pub fn rho_q(x: &Image, engine: &dyn Denoiser) -> RhoDecomposition {
    let fx = engine.denoise(x);
    let res = x - &fx;
    RhoDecomposition {
        rho_q: res.norm_sq(),
        rho_l: 0.5 * x.dot(&res),
        symmetrization: -fx.dot(&res),
    }
}

/// `x^T (x - f(x)) / 2`
pub fn rho_l(x: &Image, engine: &dyn Denoiser) -> f64 {
    rho_q(x, engine).rho_l
}

/// Resolves the starting point in the restored domain.
pub fn initial_point(y: &Image, model: &DegradationModel, init: &Init) -> Result<Image> {
    let s = model.scale_factor;
    let x0 = match init {
        Init::Observation if s > 1 => {
            return Err(contract(
                "x0 = y is undefined when the model decimates; use bicubic initialization",
            ));
        }
        Init::Observation => y.clone(),
        Init::BicubicUpscale => bicubic_upscale(y, s),
        Init::Custom(x) => x.clone(),
    };
    let (ow, oh) = model.observed_dims(x0.width(), x0.height())?;
    if (ow, oh) != y.dims() {
        return Err(contract(format!(
            "initial point {}x{} does not map to the {}x{} observation",
            x0.width(),
            x0.height(),
            y.width(),
            y.height()
        )));
    }
    Ok(x0)
}

/// Runs the scheme named in `params`.
pub fn solve(
    y: &Image,
    model: &DegradationModel,
    params: &SolverParams,
    engine: &dyn Denoiser,
    ground_truth: Option<&Image>,
) -> Result<RunReport> {
    match params.scheme {
        Scheme::Sd => solve_sd(y, model, params, engine, ground_truth),
        Scheme::Admm => solve_admm(y, model, params, engine, ground_truth),
        Scheme::Fp => solve_fp(y, model, params, engine, ground_truth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{DenoiserSpec, IdentityEngine, ZeroEngine};
    use crate::operators::{gaussian_image, make_uniform_psf};

    #[test]
    fn identity_engine_leaves_data_term() {
        let y = gaussian_image(6, 6, 1).scale(10.0);
        let m = DegradationModel::identity();
        let obj = Objective::new(&y, &m, &IdentityEngine, 0.3, 2.0);
        assert_eq!(obj.energy(&y).unwrap(), 0.0);
        let x = y.map(|v| v + 1.0);
        assert!((obj.energy(&x).unwrap() - 36.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_engine_is_ridge() {
        let y = gaussian_image(5, 4, 2).scale(10.0);
        let x = gaussian_image(5, 4, 3).scale(10.0);
        let m = DegradationModel::identity();
        let (lambda, sigma) = (0.2, 1.5);
        let obj = Objective::new(&y, &m, &ZeroEngine, lambda, sigma);
        let expect = (&x - &y).norm_sq() / (2.0 * sigma * sigma) + 0.5 * lambda * x.norm_sq();
        assert!((obj.energy(&x).unwrap() - expect).abs() < 1e-10 * expect);
        let g = obj.gradient(&x).unwrap();
        let ge = &(&x - &y).scale(1.0 / (sigma * sigma)) + &(lambda * &x);
        assert!((&g - &ge).norm() < 1e-12 * ge.norm());
    }

    #[test]
    fn four_by_four_median_by_hand() {
        let vals = [
            10.0, 200.0, 30.0, 40.0, //
            50.0, 60.0, 70.0, 80.0, //
            90.0, 100.0, 0.0, 120.0, //
            130.0, 140.0, 150.0, 160.0,
        ];
        let x = Image::new(4, 4, vals.to_vec()).unwrap();
        let y = Image::filled(4, 4, 64.0);
        let m = DegradationModel::identity();
        let (lambda, sigma) = (0.5, 4.0);
        let engine = DenoiserSpec::median(3).unwrap();
        let got = Objective::new(&y, &m, &engine, lambda, sigma).energy(&x).unwrap();

        // independent scalar evaluation: clamped 3x3 medians then the two sums
        let at = |i: i32, j: i32| vals[(j.clamp(0, 3) * 4 + i.clamp(0, 3)) as usize];
        let mut data = 0.0;
        let mut prior = 0.0;
        for j in 0..4 {
            for i in 0..4 {
                let mut win: Vec<f64> = (-1..=1)
                    .flat_map(|dj| (-1..=1).map(move |di| (di, dj)))
                    .map(|(di, dj)| at(i + di, j + dj))
                    .collect();
                win.sort_by(f64::total_cmp);
                let xv = at(i, j);
                data += (xv - 64.0) * (xv - 64.0);
                prior += xv * (xv - win[4]);
            }
        }
        let expect = data / (2.0 * sigma * sigma) + 0.5 * lambda * prior;
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn gradient_vanishes_at_consistent_fixed_point() {
        let y = Image::filled(8, 8, 90.0);
        let m = DegradationModel::blur(make_uniform_psf(3).unwrap(), 1.0).unwrap();
        let e = DenoiserSpec::tikhonov(1.0, 2.0).unwrap();
        let g = Objective::new(&y, &m, &e, 0.1, 1.0).gradient(&y).unwrap();
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn rho_terms() {
        let x = gaussian_image(6, 6, 4).scale(30.0);
        let z = rho_q(&x, &ZeroEngine);
        assert_eq!(z.rho_q, x.norm_sq());
        assert_eq!(z.rho_l, 0.5 * x.norm_sq());
        let c = Image::filled(6, 6, 12.0);
        let t = rho_q(&c, &DenoiserSpec::median(3).unwrap());
        assert_eq!((t.rho_q, t.rho_l, t.symmetrization), (0.0, 0.0, 0.0));
    }

    #[test]
    fn observation_init_rejected_for_superres() {
        let m = DegradationModel::new(make_uniform_psf(3).unwrap(), 3, 1.0).unwrap();
        let y = Image::zeros(4, 4);
        assert!(initial_point(&y, &m, &Init::Observation).is_err());
        assert_eq!(initial_point(&y, &m, &Init::BicubicUpscale).unwrap().dims(), (12, 12));
        assert!(initial_point(&y, &m, &Init::Custom(Image::zeros(9, 9))).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = SolverParams::new(Scheme::Fp, 0.1, 1.0);
        assert!(p.validate().is_ok());
        p.inner_iters_m2 = 0;
        assert!(p.validate().is_err());
        let mut p = SolverParams::new(Scheme::Sd, 0.0, 1.0);
        assert!(p.validate().is_err());
        p.lambda = 1.0;
        p.grad_tol = Some(-1.0);
        assert!(p.validate().is_err());
    }
}
