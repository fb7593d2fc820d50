//! Synthetic test images with known ground truth.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imaging::GrayImage;
use crate::mask::Mask;
use crate::raster::rasterize_snake;
use crate::subdiv::{evaluate_curve, BasicFunctionTable, ControlPolygon};

/// Depth used to fill subdivision-curve shapes.
pub const FILL_DEPTH: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disc { center: Point, radius: f64 },
    /// Axis-aligned ellipse with semi-axes along rows and columns.
    Ellipse { center: Point, row_radius: f64, col_radius: f64 },
    /// Interior of the limit curve of a control polygon.
    Curve(ControlPolygon),
}

/// Image with `fg` inside the shape and `bg` elsewhere, and the shape's mask.
/// The shape must lie inside the image.
pub fn generate(shape: &Shape, rows: usize, cols: usize, fg: f64, bg: f64) -> Result<(GrayImage, Mask)> {
    for v in [fg, bg] {
        if !(0.0..=GrayImage::MAX_INTENSITY).contains(&v) {
            return Err(Error::invalid("intensities must lie in [0, 255]"));
        }
    }
    let inside = |c: Point, rx: f64, ry: f64| {
        c.x - rx >= 0.0 && c.x + rx <= (rows - 1) as f64 && c.y - ry >= 0.0 && c.y + ry <= (cols - 1) as f64
    };
    let mask = match shape {
        Shape::Disc { center, radius } => {
            if !(*radius > 0.0) || !inside(*center, *radius, *radius) {
                return Err(Error::invalid("disc does not fit in the image"));
            }
            ellipse_mask(rows, cols, *center, *radius, *radius)
        }
        Shape::Ellipse { center, row_radius, col_radius } => {
            if !(*row_radius > 0.0 && *col_radius > 0.0) || !inside(*center, *row_radius, *col_radius) {
                return Err(Error::invalid("ellipse does not fit in the image"));
            }
            ellipse_mask(rows, cols, *center, *row_radius, *col_radius)
        }
        Shape::Curve(polygon) => {
            let table = BasicFunctionTable::new(polygon.scheme(), FILL_DEPTH)?;
            let sample = evaluate_curve(polygon, &table)?;
            let fits = sample.points.iter().all(|p| {
                p.x >= 0.0 && p.x <= (rows - 1) as f64 && p.y >= 0.0 && p.y <= (cols - 1) as f64
            });
            if !fits {
                return Err(Error::invalid("curve does not fit in the image"));
            }
            rasterize_snake(&sample, rows, cols)?.fill_mask()
        }
    };
    let image = GrayImage::from_fn(rows, cols, |r, c| if mask.get(r, c) { fg } else { bg })?;
    Ok((image, mask))
}

fn ellipse_mask(rows: usize, cols: usize, c: Point, rx: f64, ry: f64) -> Mask {
    Mask::from_fn(rows, cols, |r, col| {
        let u = (r as f64 - c.x) / rx;
        let v = (col as f64 - c.y) / ry;
        u * u + v * v <= 1.0
    })
}
