//! 8-bit PGM (P5) and PNG import/export.

use std::fs;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::Image;

/// ITU-R BT.601 luma weights for R, G, B.
pub const BT601: [f64; 3] = [0.299, 0.587, 0.114];

pub fn luminance(r: u8, g: u8, b: u8) -> f64 {
    BT601[0] * r as f64 + BT601[1] * g as f64 + BT601[2] * b as f64
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Reads an 8-bit grayscale PGM or a PNG. RGB(A) PNGs are reduced to BT.601
/// luminance; alpha is ignored.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(b"P5") {
        return decode_pgm(&bytes);
    }
    if bytes.starts_with(b"P2") || is_pgm(path) {
        return Err(Error::Format(format!("{}: only binary (P5) PGM is supported", path.display())));
    }
    decode_png(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Clamps to `[0, 255]`, rounds half away from zero and writes PGM or PNG
/// depending on the extension (`.pgm`, otherwise PNG).
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = quantize(img);
    if is_pgm(path) {
        let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
        out.extend_from_slice(&bytes);
        fs::write(path, out).map_err(|e| io_err(path, e))
    } else {
        let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes)
            .expect("buffer length matches image dimensions");
        buf.save_with_format(path, ImageFormat::Png).map_err(|e| match e {
            image::ImageError::IoError(io) => io_err(path, io),
            other => Error::Format(other.to_string()),
        })
    }
}

/// The 8-bit values `save_image` would store.
pub fn quantize(img: &Image) -> Vec<u8> {
    img.data().iter().map(|&v| quantize_value(v)).collect()
}

#[inline]
pub fn quantize_value(v: f64) -> u8 {
    // f64::round rounds half away from zero.
    v.clamp(0.0, 255.0).round() as u8
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let dynimg = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let data: Vec<f64> = match dynimg.color() {
        ColorType::L8 => dynimg.into_luma8().into_raw().into_iter().map(f64::from).collect(),
        ColorType::La8 => dynimg
            .into_luma_alpha8()
            .pixels()
            .map(|p| f64::from(p.0[0]))
            .collect(),
        ColorType::Rgb8 | ColorType::Rgba8 => {
            let rgb = match dynimg {
                DynamicImage::ImageRgb8(b) => b,
                other => other.into_rgb8(),
            };
            rgb.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect()
        }
        other => {
            return Err(Error::Format(format!("unsupported PNG color type/bit depth {other:?}")));
        }
    };
    Image::new(w, h, data)
}

fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
    }
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval} (8-bit only)")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let raster = bytes
        .get(pos..pos + w * h)
        .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    let scale = 255.0 / maxval as f64;
    Image::new(w, h, raster.iter().map(|&b| b as f64 * scale).collect())
        .map_err(|e| Error::Format(e.to_string()))
}
