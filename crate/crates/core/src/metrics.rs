//! Restoration quality measures.

use crate::error::Result;
use crate::image::Image;

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

const PEAK: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityReport {
    pub psnr_db: f64,
    pub mse: f64,
}

pub fn mse(reference: &Image, candidate: &Image) -> Result<f64> {
    reference.check_same_dims(candidate, "mse")?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(candidate.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// Peak signal-to-noise ratio on the 255 scale, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &Image, candidate: &Image) -> Result<QualityReport> {
    let mse = mse(reference, candidate)?;
    let psnr_db = if mse > 0.0 {
        10.0 * (PEAK * PEAK / mse).log10()
    } else {
        PSNR_CAP_DB
    };
    Ok(QualityReport { psnr_db, mse })
}
