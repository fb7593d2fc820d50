//! Raster image and mask files.

use std::path::Path;

use image::{GrayImage as Luma8, ImageReader, Luma};
use subsnake_core::{Grid, GrayImage, Mask};

use crate::error::{HarnessError, Result};

/// Luma weights for colour input.
const RGB_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Decodes any supported format to intensities in `[0, 255]`.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    let img = ImageReader::new(std::io::Cursor::new(bytes)).with_guessed_format().map_err(|e| HarnessError::io("<memory>", e))?.decode()?;
    to_gray(img)
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_gray(&bytes)
}

// 16-bit channels hold 8-bit samples exactly (v * 257), so 8-bit files load
// without rounding noise.
fn to_gray(img: image::DynamicImage) -> Result<GrayImage> {
    let (cols, rows) = (img.width() as usize, img.height() as usize);
    let unit = |v: u16| v as f64 / 257.0;
    let data: Vec<f64> = if img.color().has_color() {
        img.to_rgb16()
            .pixels()
            .map(|p| RGB_WEIGHTS[0] * unit(p[0]) + RGB_WEIGHTS[1] * unit(p[1]) + RGB_WEIGHTS[2] * unit(p[2]))
            .collect()
    } else {
        img.to_luma16().pixels().map(|p| unit(p[0])).collect()
    };
    Ok(GrayImage::new(Grid::from_vec(rows, cols, data)?)?)
}

/// 8-bit PNG, intensities rounded and clamped.
pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    let out = Luma8::from_fn(img.cols() as u32, img.rows() as u32, |c, r| {
        Luma([img.get(r as usize, c as usize).round().clamp(0.0, 255.0) as u8])
    });
    out.save(path)?;
    Ok(())
}

/// Any nonzero pixel is inside; colour input is reduced to luma first.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let img = load_gray(path)?;
    Ok(Mask::from_fn(img.rows(), img.cols(), |r, c| img.get(r, c) > 0.0))
}

/// PNG with 255 inside and 0 outside.
pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let out = Luma8::from_fn(mask.cols() as u32, mask.rows() as u32, |c, r| {
        Luma([if mask.get(r as usize, c as usize) { 255 } else { 0 }])
    });
    out.save(path)?;
    Ok(())
}
