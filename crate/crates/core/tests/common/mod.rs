#![allow(dead_code)]

use std::path::PathBuf;

use red_core::operators::{add_gaussian_noise, make_uniform_psf};
use red_core::{load_image, DegradationModel, Image};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn cameraman() -> Image {
    load_image(data_path("cameraman256.pgm")).expect("test image")
}

/// 64x64 patch with an edge-rich mix of figure and background.
pub fn cameraman_crop() -> Image {
    cameraman().crop(96, 64, 64, 64).unwrap()
}

/// 9x9 uniform blur with noise std sqrt(2).
pub fn uniform_deblur_model() -> DegradationModel {
    DegradationModel::blur(make_uniform_psf(9).unwrap(), 2f64.sqrt()).unwrap()
}

pub fn degrade(model: &DegradationModel, x: &Image, seed: u64) -> Image {
    add_gaussian_noise(&model.apply(x).unwrap(), model.noise_sigma, seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

pub fn rel_img(a: &Image, b: &Image) -> f64 {
    (a - b).norm() / b.norm()
}
