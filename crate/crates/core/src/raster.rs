//! Scanline rasterization of the fine snake polygon into boundary pixels, and
//! the signed strip sums that give the region intensity and area.
//!
//! Image row `j` is the scanline `x = j`. A non-horizontal edge owns the rows
//! `j` with `min(x) <= j < max(x)` (half-open, so a row through a shared vertex
//! is owned by exactly one of the two edges meeting there) and picks, on each
//! of them, the column `l = ⌈y*⌉` where `y*` is the exact crossing of the edge
//! with the scanline. Pixel columns `0..l` lie left of the crossing, so the
//! signed strip sums count exactly the pixels whose lattice point lies inside
//! the polygon (clipped to the image).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imaging::RowPrefixTable;
use crate::mask::Mask;
use crate::subdiv::CurveSample;

/// Direction of an edge in the row direction, `sign(x_i - x_{i+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// Row coordinate increases along the edge; sign −1.
    Downhill,
    Horizontal,
    /// Row coordinate decreases along the edge; sign +1.
    Uphill,
}

impl EdgeClass {
    pub fn of(a: Point, b: Point) -> Self {
        if a.x < b.x {
            EdgeClass::Downhill
        } else if a.x > b.x {
            EdgeClass::Uphill
        } else {
            EdgeClass::Horizontal
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            EdgeClass::Downhill => -1,
            EdgeClass::Horizontal => 0,
            EdgeClass::Uphill => 1,
        }
    }
}

/// One selected pixel: on row `row`, edge `edge` bounds the strip of columns
/// `0..col` with sign `sign`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryPixel {
    pub edge: usize,
    pub row: usize,
    pub col: usize,
    pub sign: i8,
}

/// Rows owned by one edge; its pixels are `pixels[start..start + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeRun {
    pub class: EdgeClass,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRaster {
    rows: usize,
    cols: usize,
    edges: Vec<EdgeRun>,
    pixels: Vec<BoundaryPixel>,
}

/// Region intensity `I_Ω` and pixel area `|Ω|`. Positive for counterclockwise
/// snakes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionIntegrals {
    pub intensity: f64,
    pub area: f64,
}

/// Boundary pixels of the closed polygon `sample.points` on a `rows × cols`
/// image. Parts of the polygon outside the image are clipped.
pub fn rasterize_snake(sample: &CurveSample, rows: usize, cols: usize) -> Result<BoundaryRaster> {
    rasterize_polygon(&sample.points, rows, cols)
}

/// [`rasterize_snake`] on a bare closed polygon.
pub fn rasterize_polygon(points: &[Point], rows: usize, cols: usize) -> Result<BoundaryRaster> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { required: 3, got: points.len() });
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("snake has non-finite coordinates"));
    }
    if points.iter().all(|&p| p == points[0]) {
        return Err(Error::DegenerateRegion { area: 0.0 });
    }
    let n = points.len();
    let mut edges = Vec::with_capacity(n);
    let mut pixels = Vec::new();
    let max_row = rows as f64;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        let class = EdgeClass::of(a, b);
        let start = pixels.len();
        if class != EdgeClass::Horizontal {
            let (lo, hi) = if a.x < b.x { (a.x, b.x) } else { (b.x, a.x) };
            let j0 = libm::ceil(lo).max(0.0);
            let j1 = libm::ceil(hi).min(max_row);
            let slope = (b.y - a.y) / (b.x - a.x);
            let mut j = j0;
            while j < j1 {
                let y = a.y + (j - a.x) * slope;
                let col = libm::ceil(y).clamp(0.0, cols as f64) as usize;
                pixels.push(BoundaryPixel { edge: i, row: j as usize, col, sign: class.sign() });
                j += 1.0;
            }
        }
        edges.push(EdgeRun { class, start, len: pixels.len() - start });
    }
    Ok(BoundaryRaster { rows, cols, edges, pixels })
}

impl BoundaryRaster {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn edges(&self) -> &[EdgeRun] {
        &self.edges
    }

    /// All boundary pixels, grouped by edge in snake order.
    pub fn pixels(&self) -> &[BoundaryPixel] {
        &self.pixels
    }

    pub fn edge_pixels(&self, edge: usize) -> &[BoundaryPixel] {
        let run = self.edges[edge];
        &self.pixels[run.start..run.start + run.len]
    }

    /// Signed strip sums `Σ s·P[j][l]` and `Σ s·l`.
    pub fn integrals(&self, prefix: &RowPrefixTable) -> Result<RegionIntegrals> {
        if prefix.rows() != self.rows || prefix.cols() != self.cols {
            return Err(Error::invalid("prefix table does not match raster dimensions"));
        }
        let mut intensity = 0.0;
        let mut area = 0i64;
        for p in &self.pixels {
            let s = p.sign as f64;
            intensity += s * prefix.get(p.row, p.col);
            area += p.sign as i64 * p.col as i64;
        }
        Ok(RegionIntegrals { intensity, area: area as f64 })
    }

    /// Strip sums over the even-odd pixel set: on each row the sorted boundary
    /// columns are paired up and each pair bounds one span. Equal to
    /// [`integrals`](Self::integrals) for simple counterclockwise snakes, and
    /// still the sums over a genuine pixel set when the snake crosses itself.
    pub fn even_odd_integrals(&self, prefix: &RowPrefixTable) -> Result<RegionIntegrals> {
        if prefix.rows() != self.rows || prefix.cols() != self.cols {
            return Err(Error::invalid("prefix table does not match raster dimensions"));
        }
        let mut intensity = 0.0;
        let mut area = 0i64;
        for row in self.row_pairs() {
            for pair in row.chunks_exact(2) {
                let (a, b) = (pair[0], pair[1]);
                intensity += prefix.get(b.row, b.col) - prefix.get(a.row, a.col);
                area += b.col as i64 - a.col as i64;
            }
        }
        Ok(RegionIntegrals { intensity, area: area as f64 })
    }

    /// True when every pixel has winding number 0 or 1, i.e. the signed strip
    /// sums describe a set of pixels. Fails for snakes that cross themselves
    /// across a pixel row or run clockwise.
    pub fn winding_is_binary(&self) -> bool {
        for entries in self.row_pairs() {
            let mut winding = 0i32;
            let mut k = entries.len();
            // Winding of pixel c is the signed count of entries with col > c.
            while k > 0 {
                let col = entries[k - 1].col;
                while k > 0 && entries[k - 1].col == col {
                    winding += entries[k - 1].sign as i32;
                    k -= 1;
                }
                if !(winding == 0 || winding == 1) && col > 0 {
                    return false;
                }
            }
        }
        true
    }

    /// Signed pixel area alone.
    pub fn area(&self) -> f64 {
        self.pixels.iter().map(|p| p.sign as i64 * p.col as i64).sum::<i64>() as f64
    }

    /// Per-row boundary pixels sorted by column; consecutive entries bound the
    /// interior spans.
    pub fn row_pairs(&self) -> Vec<Vec<BoundaryPixel>> {
        let mut by_row = vec![Vec::new(); self.rows];
        for p in &self.pixels {
            by_row[p.row].push(*p);
        }
        for row in &mut by_row {
            row.sort_by_key(|p| (p.col, p.edge));
        }
        by_row
    }

    /// Even-odd fill: pixel `(j, c)` is inside when an odd number of the
    /// row's boundary columns exceed `c`.
    pub fn fill_mask(&self) -> Mask {
        let mut mask = Mask::new(self.rows, self.cols);
        let mut count = vec![0u32; self.cols + 1];
        for row in self.row_pairs() {
            if row.is_empty() {
                continue;
            }
            let j = row[0].row;
            count.iter_mut().for_each(|c| *c = 0);
            for p in &row {
                count[p.col] += 1;
            }
            let mut above = 0u32;
            for c in (0..self.cols).rev() {
                above += count[c + 1];
                if above % 2 == 1 {
                    mask.set(j, c, true);
                }
            }
        }
        mask
    }
}

/// Functional form of [`BoundaryRaster::integrals`].
pub fn region_integrals(raster: &BoundaryRaster, prefix: &RowPrefixTable) -> Result<RegionIntegrals> {
    raster.integrals(prefix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{build_row_prefix, GrayImage};

    fn square(r0: f64, c0: f64, side: f64) -> Vec<Point> {
        // counterclockwise in the (row, col) frame
        vec![
            Point::new(r0 + side, c0),
            Point::new(r0 + side, c0 + side),
            Point::new(r0, c0 + side),
            Point::new(r0, c0),
        ]
    }

    #[test]
    fn square_edges() {
        let r = rasterize_polygon(&square(5.5, 3.5, 10.0), 30, 30).unwrap();
        let e = r.edges();
        assert_eq!(e[0].class, EdgeClass::Horizontal);
        assert_eq!(e[2].class, EdgeClass::Horizontal);
        assert_eq!(e[1].class, EdgeClass::Uphill);
        assert_eq!(e[3].class, EdgeClass::Downhill);
        let right: Vec<_> = r.edge_pixels(1).iter().map(|p| (p.row, p.col)).collect();
        let left: Vec<_> = r.edge_pixels(3).iter().map(|p| (p.row, p.col)).collect();
        assert_eq!(right, (6..16).map(|j| (j, 14)).collect::<Vec<_>>());
        assert_eq!(left, (6..16).map(|j| (j, 4)).collect::<Vec<_>>());
        assert_eq!(r.area(), 100.0);
        assert_eq!(r.fill_mask().count(), 100);
    }

    #[test]
    fn orientation_negates() {
        let sq = square(2.2, 1.7, 7.3);
        let mut rev = sq.clone();
        rev.reverse();
        let ones = build_row_prefix(&GrayImage::from_fn(12, 12, |_, _| 1.0).unwrap());
        let a = rasterize_polygon(&sq, 12, 12).unwrap().integrals(&ones).unwrap();
        let b = rasterize_polygon(&rev, 12, 12).unwrap().integrals(&ones).unwrap();
        assert_eq!(a.area, -b.area);
        assert_eq!(a.intensity, -b.intensity);
        assert!(a.area > 0.0);
    }

    #[test]
    fn clipped_to_image() {
        let r = rasterize_polygon(&square(-5.0, -5.0, 10.0), 8, 8).unwrap();
        // lattice points (0..=4, 0..=4) minus the far edges: rows 0..5, cols 0..5
        assert_eq!(r.area(), 25.0);
        let m = r.fill_mask();
        assert_eq!(m.count(), 25);
        assert!(m.get(4, 4) && !m.get(5, 0));
    }

    #[test]
    fn degenerate_inputs() {
        let p = Point::new(3.0, 3.0);
        assert!(matches!(
            rasterize_polygon(&[p, p, p, p], 10, 10),
            Err(Error::DegenerateRegion { .. })
        ));
        assert!(rasterize_polygon(&[p, Point::new(f64::NAN, 1.0), p], 10, 10).is_err());
        assert!(rasterize_polygon(&[p, p], 10, 10).is_err());
    }
}
