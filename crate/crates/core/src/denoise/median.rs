use rayon::prelude::*;

use crate::error::{contract, Result};
use crate::image::Image;

/// Per-pixel median over a `window x window` neighbourhood, edges replicated.
pub fn median_filter(x: &Image, window: usize) -> Result<Image> {
    if window.is_multiple_of(2) {
        return Err(contract(format!("median window must be odd, got {window}")));
    }
    Ok(median_unchecked(x, window))
}

pub(super) fn median_unchecked(x: &Image, window: usize) -> Image {
    debug_assert!(window % 2 == 1);
    let (w, h) = x.dims();
    let r = (window / 2) as isize;
    let mid = window * window / 2;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each_init(
        || Vec::with_capacity(window * window),
        |buf, (y, row)| {
            for (xo, o) in row.iter_mut().enumerate() {
                buf.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        buf.push(x.get_clamped(xo as isize + dx, y as isize + dy));
                    }
                }
                let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
                *o = *m;
            }
        },
    );
    Image::from_raw(w, h, out)
}
