//! Image restoration by denoiser-driven regularization.
//!
//! The crate covers the whole pipeline: degradation operators and their
//! adjoints, pluggable denoising engines, empirical checks of an engine's
//! homogeneity and passivity, the RED objective with steepest-descent, ADMM
//! and fixed-point solvers, a Plug-and-Play ADMM baseline, and a small lab
//! for denoisers induced by quadratic priors.

pub mod analysis;
pub mod denoise;
pub mod error;
pub mod fft;
pub mod image;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod p3;
pub mod prior_lab;
pub mod red;

pub use analysis::{certify, PowerMethodParams, PropertyReport};
pub use denoise::{rescale_noise_level, Denoiser, DenoiserSpec, Engine, NlmParams};
pub use error::{Error, Result};
pub use image::Image;
pub use io::{load_image, save_image};
pub use metrics::{psnr, QualityReport};
pub use operators::{DegradationModel, Psf};
pub use p3::{solve_p3, P3Params};
pub use prior_lab::{QuadraticPrior, PriorOperator};
pub use red::{solve, Init, InnerSolve, Objective, RunReport, Scheme, SolverParams};
