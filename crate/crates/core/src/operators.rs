//! Linear degradation operators `H` (periodic blur, optionally followed by
//! decimation), their adjoints, synthetic noise, and the Fourier-domain solve
//! of the regularized normal equations.
//!
//! Boundaries are periodic everywhere so that a pure blur is circulant and is
//! diagonalized exactly by the 2-D DFT. Decimation by `s` keeps pixels whose
//! coordinates are multiples of `s`, starting from the top-left corner.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::fft;
use crate::image::Image;

/// Normalized, nonnegative blur kernel with odd side lengths; the middle
/// element is the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Psf {
    kernel: Image,
}

impl Psf {
    pub fn new(kernel: Image) -> Result<Self> {
        let (w, h) = kernel.dims();
        if w % 2 == 0 || h % 2 == 0 {
            return Err(contract(format!("psf sides must be odd, got {w}x{h}")));
        }
        if kernel.data().iter().any(|&v| v < 0.0) {
            return Err(contract("psf entries must be nonnegative"));
        }
        let sum = kernel.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(contract(format!("psf must sum to 1, sums to {sum}")));
        }
        Ok(Self { kernel })
    }

    pub fn identity() -> Self {
        Self {
            kernel: Image::filled(1, 1, 1.0),
        }
    }

    pub fn kernel(&self) -> &Image {
        &self.kernel
    }

    fn center(&self) -> (isize, isize) {
        ((self.kernel.width() / 2) as isize, (self.kernel.height() / 2) as isize)
    }

    pub fn is_symmetric(&self) -> bool {
        let (w, h) = self.kernel.dims();
        (0..h).all(|y| (0..w).all(|x| self.kernel.get(x, y) == self.kernel.get(w - 1 - x, h - 1 - y)))
    }

    /// `|F(psf)|^2` on a `width x height` periodic grid.
    pub fn gain_sq(&self, width: usize, height: usize) -> Vec<f64> {
        let mut embedded = Image::zeros(width, height);
        let (cx, cy) = self.center();
        let (kw, kh) = self.kernel.dims();
        for j in 0..kh {
            for i in 0..kw {
                let x = (i as isize - cx).rem_euclid(width as isize) as usize;
                let y = (j as isize - cy).rem_euclid(height as isize) as usize;
                let v = embedded.get(x, y) + self.kernel.get(i, j);
                embedded.set(x, y, v);
            }
        }
        fft::forward(&embedded).iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Box kernel with `side x side` taps of `1/side^2`.
pub fn make_uniform_psf(side: usize) -> Result<Psf> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(contract(format!("uniform psf side must be odd and >= 1, got {side}")));
    }
    let v = 1.0 / (side * side) as f64;
    Ok(Psf {
        kernel: Image::filled(side, side, v),
    })
}

/// Isotropic Gaussian sampled on integer offsets and renormalized.
pub fn make_gaussian_psf(side: usize, std: f64) -> Result<Psf> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(contract(format!("gaussian psf side must be odd and >= 1, got {side}")));
    }
    if !(std > 0.0 && std.is_finite()) {
        return Err(contract(format!("gaussian psf std must be positive, got {std}")));
    }
    let c = (side / 2) as f64;
    let raw = Image::from_fn(side, side, |x, y| {
        let dx = x as f64 - c;
        let dy = y as f64 - c;
        (-(dx * dx + dy * dy) / (2.0 * std * std)).exp()
    });
    let total = raw.sum();
    Ok(Psf {
        kernel: raw.scale(1.0 / total),
    })
}

/// `y = H x + e` with `H` = periodic blur by `psf`, then decimation by
/// `scale_factor`; `noise_sigma` is the standard deviation of `e`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradationModel {
    pub psf: Psf,
    pub scale_factor: usize,
    pub noise_sigma: f64,
}

impl DegradationModel {
    pub fn new(psf: Psf, scale_factor: usize, noise_sigma: f64) -> Result<Self> {
        if scale_factor == 0 {
            return Err(contract("scale factor must be >= 1"));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(contract(format!("noise sigma must be nonnegative, got {noise_sigma}")));
        }
        Ok(Self {
            psf,
            scale_factor,
            noise_sigma,
        })
    }

    /// Pure deblurring model.
    pub fn blur(psf: Psf, noise_sigma: f64) -> Result<Self> {
        Self::new(psf, 1, noise_sigma)
    }

    pub fn identity() -> Self {
        Self {
            psf: Psf::identity(),
            scale_factor: 1,
            noise_sigma: 0.0,
        }
    }

    /// True when `H` is circulant and the normal equations have an FFT solve.
    pub fn is_circulant(&self) -> bool {
        self.scale_factor == 1
    }

    pub fn observed_dims(&self, width: usize, height: usize) -> Result<(usize, usize)> {
        let s = self.scale_factor;
        if !width.is_multiple_of(s) || !height.is_multiple_of(s) {
            return Err(contract(format!(
                "{width}x{height} image is not divisible by scale factor {s}"
            )));
        }
        Ok((width / s, height / s))
    }

    pub fn apply(&self, x: &Image) -> Result<Image> {
        self.observed_dims(x.width(), x.height())?;
        let blurred = convolve_periodic(x, &self.psf);
        Ok(decimate(&blurred, self.scale_factor))
    }

    pub fn adjoint(&self, r: &Image) -> Result<Image> {
        Ok(self.adjoint_to(r, r.width() * self.scale_factor, r.height() * self.scale_factor))
    }

    /// `H^T r` for an `r` already known to have observed dimensions.
    fn adjoint_to(&self, r: &Image, width: usize, height: usize) -> Image {
        let up = zero_fill_upsample(r, self.scale_factor, width, height);
        correlate_periodic(&up, &self.psf)
    }

    /// `H^T H z / sigma^2 + shift * z`, the operator of the regularized
    /// normal equations.
    pub fn normal_op(&self, z: &Image, sigma: f64, shift: f64) -> Result<Image> {
        let hz = self.apply(z)?;
        let mut out = self.adjoint_to(&hz, z.width(), z.height());
        let inv_var = 1.0 / (sigma * sigma);
        for (o, &v) in out.data_mut().iter_mut().zip(z.data()) {
            *o = *o * inv_var + shift * v;
        }
        Ok(out)
    }
}

fn convolve_periodic(x: &Image, psf: &Psf) -> Image {
    periodic_filter(x, psf, -1)
}

fn correlate_periodic(x: &Image, psf: &Psf) -> Image {
    periodic_filter(x, psf, 1)
}

/// `out[p] = sum_o k[o] x[p + sign*o]`: convolution for `sign = -1`,
/// correlation for `sign = +1`.
fn periodic_filter(x: &Image, psf: &Psf, sign: isize) -> Image {
    let (w, h) = x.dims();
    let k = psf.kernel();
    let (kw, kh) = k.dims();
    let (cx, cy) = psf.center();
    if kw == 1 && kh == 1 {
        return x.scale(k.get(0, 0));
    }
    let taps: Vec<(isize, isize, f64)> = (0..kh)
        .flat_map(|j| (0..kw).map(move |i| (i, j)))
        .filter_map(|(i, j)| {
            let v = k.get(i, j);
            (v != 0.0).then_some((sign * (i as isize - cx), sign * (j as isize - cy), v))
        })
        .collect();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (xo, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(dx, dy, v) in &taps {
                acc += v * x.get_periodic(xo as isize + dx, y as isize + dy);
            }
            *o = acc;
        }
    });
    Image::from_raw(w, h, out)
}

fn decimate(x: &Image, s: usize) -> Image {
    if s == 1 {
        return x.clone();
    }
    Image::from_fn(x.width() / s, x.height() / s, |i, j| x.get(i * s, j * s))
}

fn zero_fill_upsample(r: &Image, s: usize, width: usize, height: usize) -> Image {
    if s == 1 {
        return r.clone();
    }
    let mut up = Image::zeros(width, height);
    for j in 0..r.height() {
        for i in 0..r.width() {
            up.set(i * s, j * s, r.get(i, j));
        }
    }
    up
}

/// `x + e`, `e` i.i.d. `N(0, sigma^2)` drawn from ChaCha20 seeded with
/// `seed` (row-major order). Same seed, same output.
pub fn add_gaussian_noise(x: &Image, sigma: f64, seed: u64) -> Image {
    if sigma == 0.0 {
        return x.clone();
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = x.clone();
    for v in out.data_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * e;
    }
    out
}

/// Unit-variance Gaussian image from the same named generator.
pub fn gaussian_image(width: usize, height: usize, seed: u64) -> Image {
    add_gaussian_noise(&Image::zeros(width, height), 1.0, seed)
}

/// Solves `(H^T H / sigma^2 + lambda I) z = rhs` exactly in the Fourier
/// domain. Only circulant `H` (no decimation) is supported.
pub fn solve_normal_fft(model: &DegradationModel, rhs: &Image, lambda: f64, sigma: f64) -> Result<Image> {
    if !model.is_circulant() {
        return Err(Error::Unsupported(format!(
            "FFT normal solve needs a pure blur, scale factor is {}",
            model.scale_factor
        )));
    }
    if !(lambda > 0.0 && sigma > 0.0) {
        return Err(contract(format!("lambda and sigma must be positive, got {lambda}, {sigma}")));
    }
    let inv_var = 1.0 / (sigma * sigma);
    let symbol: Vec<f64> = model
        .psf
        .gain_sq(rhs.width(), rhs.height())
        .into_iter()
        .map(|g| 1.0 / (g * inv_var + lambda))
        .collect();
    Ok(fft::filter_real_symbol(rhs, &symbol))
}

/// Keys cubic convolution weight (`a = -0.5`).
fn cubic_weight(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Bicubic upscaling aligned with the decimation grid: output pixel `X`
/// samples the low-resolution signal at `X / s`, so kept sites reproduce `y`
/// exactly. Edges replicate.
pub fn bicubic_upscale(y: &Image, s: usize) -> Image {
    if s == 1 {
        return y.clone();
    }
    let (w, h) = (y.width() * s, y.height() * s);
    let weights: Vec<[f64; 4]> = (0..s)
        .map(|phase| {
            let t = phase as f64 / s as f64;
            [cubic_weight(1.0 + t), cubic_weight(t), cubic_weight(1.0 - t), cubic_weight(2.0 - t)]
        })
        .collect();
    Image::from_fn(w, h, |x, yy| {
        let (bx, px) = ((x / s) as isize, x % s);
        let (by, py) = ((yy / s) as isize, yy % s);
        let wx = weights[px];
        let wy = weights[py];
        let mut acc = 0.0;
        for (m, wym) in wy.iter().enumerate() {
            for (n, wxn) in wx.iter().enumerate() {
                acc += wym * wxn * y.get_clamped(bx + n as isize - 1, by + m as isize - 1);
            }
        }
        acc
    })
}
