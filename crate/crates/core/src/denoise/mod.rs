//! Denoising engines `f(x)`.
//!
//! Every engine maps an image to an image of the same size, is
//! deterministic, and fixes constant images. [`DenoiserSpec`] selects one of
//! the concrete engines together with its operating noise level; the
//! [`Denoiser`] trait is what solvers and the analysis toolkit consume, so
//! test doubles and prior-induced engines plug in the same way.

mod doubles;
mod median;
mod nlm;
mod tikhonov;

pub use doubles::{DenseLinearEngine, IdentityEngine, ScalingEngine, ZeroEngine};
pub use median::median_filter;
pub use nlm::{nlm, NlmParams};
pub use tikhonov::{tikhonov_symbol, tikhonov_wiener};

use crate::error::{contract, Result};
use crate::image::Image;

pub trait Denoiser: Sync {
    fn denoise(&self, x: &Image) -> Image;

    /// Native operating noise level, if the engine has one.
    fn noise_level(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn denoise(&self, x: &Image) -> Image {
        (**self).denoise(x)
    }
    fn noise_level(&self) -> Option<f64> {
        (**self).noise_level()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Engine {
    Median { window: usize },
    Nlm(NlmParams),
    Tikhonov { reg_weight: f64 },
}

/// An engine plus the noise level `sigma_f` it operates at.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserSpec {
    engine: Engine,
    sigma_f: f64,
}

impl DenoiserSpec {
    pub fn new(engine: Engine, sigma_f: f64) -> Result<Self> {
        if !(sigma_f > 0.0 && sigma_f.is_finite()) {
            return Err(contract(format!("sigma_f must be positive, got {sigma_f}")));
        }
        match &engine {
            Engine::Median { window } if window % 2 == 0 => {
                return Err(contract(format!("median window must be odd, got {window}")));
            }
            Engine::Nlm(p) => p.validate()?,
            Engine::Tikhonov { reg_weight } if !(*reg_weight > 0.0 && reg_weight.is_finite()) => {
                return Err(contract(format!("tikhonov weight must be positive, got {reg_weight}")));
            }
            _ => {}
        }
        Ok(Self { engine, sigma_f })
    }

    pub fn median(window: usize) -> Result<Self> {
        // the median ignores the noise level; any positive value will do
        Self::new(Engine::Median { window }, 1.0)
    }

    pub fn nlm(params: NlmParams, sigma_f: f64) -> Result<Self> {
        Self::new(Engine::Nlm(params), sigma_f)
    }

    pub fn tikhonov(reg_weight: f64, sigma_f: f64) -> Result<Self> {
        Self::new(Engine::Tikhonov { reg_weight }, sigma_f)
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn sigma_f(&self) -> f64 {
        self.sigma_f
    }

    /// The same engine at a different operating level.
    pub fn with_sigma_f(&self, sigma_f: f64) -> Result<Self> {
        Self::new(self.engine.clone(), sigma_f)
    }
}

impl Denoiser for DenoiserSpec {
    fn denoise(&self, x: &Image) -> Image {
        match &self.engine {
            Engine::Median { window } => median::median_unchecked(x, *window),
            Engine::Nlm(p) => nlm(x, self.sigma_f, p),
            Engine::Tikhonov { reg_weight } => tikhonov_wiener(x, self.sigma_f, *reg_weight),
        }
    }

    fn noise_level(&self) -> Option<f64> {
        Some(self.sigma_f)
    }

    fn name(&self) -> String {
        match &self.engine {
            Engine::Median { window } => format!("median{window}"),
            Engine::Nlm(p) => format!("nlm(p{},s{},h{})", p.patch_radius, p.search_radius, p.bandwidth_scale),
            Engine::Tikhonov { reg_weight } => format!("tikhonov({reg_weight})"),
        }
    }
}

/// Runs a fixed-level engine at `target_sigma` through the scaling relation
/// `f_target(x) = f_native(c x) / c` with `c = native / target`.
///
/// Engines without a native level are called directly.
pub fn rescale_noise_level(engine: &dyn Denoiser, target_sigma: f64, x: &Image) -> Image {
    let Some(native) = engine.noise_level() else {
        return engine.denoise(x);
    };
    let c = native / target_sigma;
    if c == 1.0 {
        return engine.denoise(x);
    }
    engine.denoise(&x.scale(c)).scale(1.0 / c)
}
