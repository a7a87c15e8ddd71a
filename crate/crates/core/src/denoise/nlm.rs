use rayon::prelude::*;

use crate::error::{contract, Result};
use crate::image::Image;

#[derive(Clone, Debug, PartialEq)]
pub struct NlmParams {
    pub patch_radius: usize,
    pub search_radius: usize,
    /// Kernel bandwidth in units of the operating noise level: `h = bandwidth_scale * sigma_f`.
    pub bandwidth_scale: f64,
}

impl Default for NlmParams {
    fn default() -> Self {
        Self {
            patch_radius: 1,
            search_radius: 5,
            bandwidth_scale: 1.0,
        }
    }
}

impl NlmParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_radius < 1 || self.search_radius < 1 {
            return Err(contract(format!(
                "nlm radii must be >= 1, got patch {} search {}",
                self.patch_radius, self.search_radius
            )));
        }
        if !(self.bandwidth_scale > 0.0 && self.bandwidth_scale.is_finite()) {
            return Err(contract(format!(
                "nlm bandwidth_scale must be positive, got {}",
                self.bandwidth_scale
            )));
        }
        Ok(())
    }
}

/// Pixelwise non-local means: each output pixel is the normalized average of
/// the pixels in its search window, weighted by
/// `exp(-|P_i - P_j|^2 / (2 h^2))` over replicate-padded patches.
///
/// The search window is clipped at the image border.
pub fn nlm(x: &Image, sigma_f: f64, params: &NlmParams) -> Image {
    let (w, h) = x.dims();
    let pr = params.patch_radius;
    let sr = params.search_radius as isize;
    let bw = params.bandwidth_scale * sigma_f;
    let inv = 1.0 / (2.0 * bw * bw);

    // replicate-padded copy so patch reads need no bounds logic
    let pw = w + 2 * pr;
    let padded: Vec<f64> = (0..h + 2 * pr)
        .flat_map(|py| {
            (0..pw).map(move |px| x.get_clamped(px as isize - pr as isize, py as isize - pr as isize))
        })
        .collect();
    let side = 2 * pr + 1;
    let dist = |ax: usize, ay: usize, bx: usize, by: usize| -> f64 {
        let mut acc = 0.0;
        for dy in 0..side {
            let ra = &padded[(ay + dy) * pw + ax..][..side];
            let rb = &padded[(by + dy) * pw + bx..][..side];
            for (a, b) in ra.iter().zip(rb) {
                let d = a - b;
                acc += d * d;
            }
        }
        acc
    };

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(yi, row)| {
        let y0 = (yi as isize - sr).max(0) as usize;
        let y1 = (yi as isize + sr).min(h as isize - 1) as usize;
        for (xi, o) in row.iter_mut().enumerate() {
            let x0 = (xi as isize - sr).max(0) as usize;
            let x1 = (xi as isize + sr).min(w as isize - 1) as usize;
            let mut num = 0.0;
            let mut den = 0.0;
            for yj in y0..=y1 {
                for xj in x0..=x1 {
                    let wt = (-dist(xi, yi, xj, yj) * inv).exp();
                    num += wt * x.get(xj, yj);
                    den += wt;
                }
            }
            // the self weight is 1, so den >= 1
            *o = num / den;
        }
    });
    Image::from_raw(w, h, out)
}
