use crate::fft::{self, difference_gain_sq};
use crate::image::Image;

/// Fourier gains of `(I + w sigma_f^2 B^T B)^{-1}`, `B` the periodic
/// horizontal and vertical first differences, in FFT bin order.
pub fn tikhonov_symbol(width: usize, height: usize, sigma_f: f64, reg_weight: f64) -> Vec<f64> {
    let a = reg_weight * sigma_f * sigma_f;
    let mut symbol = Vec::with_capacity(width * height);
    for ky in 0..height {
        let gy = difference_gain_sq(ky, height);
        for kx in 0..width {
            symbol.push(1.0 / (1.0 + a * (difference_gain_sq(kx, width) + gy)));
        }
    }
    symbol
}

/// Linear Tikhonov/Wiener denoiser, solved exactly by FFT.
pub fn tikhonov_wiener(x: &Image, sigma_f: f64, reg_weight: f64) -> Image {
    let symbol = tikhonov_symbol(x.width(), x.height(), sigma_f, reg_weight);
    fft::filter_real_symbol(x, &symbol)
}
