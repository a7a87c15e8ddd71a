//! 2-D discrete Fourier transforms of row-major real images, and the
//! diagonalization of periodic (circulant) operators they provide.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::image::Image;

/// Unnormalized 2-D transform of a row-major complex buffer, in place.
fn transform(width: usize, height: usize, buf: &mut [Complex64], direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let rows = planner.plan_fft(width, direction);
    let mut scratch = vec![Complex64::default(); rows.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(width) {
        rows.process_with_scratch(row, &mut scratch);
    }

    let cols = planner.plan_fft(height, direction);
    scratch.resize(cols.get_inplace_scratch_len(), Complex64::default());
    let mut column = vec![Complex64::default(); height];
    for x in 0..width {
        for (y, c) in column.iter_mut().enumerate() {
            *c = buf[y * width + x];
        }
        cols.process_with_scratch(&mut column, &mut scratch);
        for (y, c) in column.iter().enumerate() {
            buf[y * width + x] = *c;
        }
    }
}

pub fn forward(img: &Image) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(img.width(), img.height(), &mut buf, FftDirection::Forward);
    buf
}

/// Inverse transform, normalized, keeping the real part.
pub fn inverse_real(width: usize, height: usize, mut spectrum: Vec<Complex64>) -> Image {
    transform(width, height, &mut spectrum, FftDirection::Inverse);
    let norm = 1.0 / (width * height) as f64;
    Image::from_raw(width, height, spectrum.into_iter().map(|c| c.re * norm).collect())
}

/// Multiplies the spectrum of `img` by a real, frequency-indexed symbol.
/// The symbol must be even (`s(k) = s(-k)`) for the result to be real.
pub fn filter_real_symbol(img: &Image, symbol: &[f64]) -> Image {
    debug_assert_eq!(symbol.len(), img.len());
    let mut spec = forward(img);
    for (c, &s) in spec.iter_mut().zip(symbol) {
        *c *= s;
    }
    inverse_real(img.width(), img.height(), spec)
}

/// `4 sin^2(pi k / n)`: the squared gain of the periodic first difference.
#[inline]
pub fn difference_gain_sq(k: usize, n: usize) -> f64 {
    let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
    4.0 * s * s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let img = Image::from_fn(6, 5, |x, y| (x * 7 + y * y) as f64 - 3.5);
        let back = inverse_real(6, 5, forward(&img));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_bin_is_the_sum() {
        let img = Image::from_fn(4, 3, |x, y| (x + y) as f64);
        let spec = forward(&img);
        assert!((spec[0].re - img.sum()).abs() < 1e-12);
        assert!(spec[0].im.abs() < 1e-12);
    }

    #[test]
    fn difference_gain_matches_direct_dft() {
        // |1 - e^{-2 pi i k / n}|^2
        let n = 7;
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let direct = (1.0 - th.cos()).powi(2) + th.sin().powi(2);
            assert!((difference_gain_sq(k, n) - direct).abs() < 1e-12);
        }
    }
}
