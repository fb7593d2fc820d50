//! Grayscale rasters, derivative filters, bilinear sampling and row prefix sums.
//!
//! Pixel `(r, c)` sits at the lattice point `(r, c)`; `x` runs down the rows
//! and `y` along the columns.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major `rows × cols` array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid("grid data length does not match dimensions"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Replicates the border for out-of-range indices.
    #[inline]
    fn get_clamped(&self, r: isize, c: isize) -> f64 {
        let r = r.clamp(0, self.rows as isize - 1) as usize;
        let c = c.clamp(0, self.cols as isize - 1) as usize;
        self.get(r, c)
    }
}

/// Intensity image with values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(Grid);

impl GrayImage {
    pub const MAX_INTENSITY: f64 = 255.0;

    pub fn new(grid: Grid) -> Result<Self> {
        if grid.rows < 3 || grid.cols < 3 {
            return Err(Error::invalid("image must be at least 3x3"));
        }
        if grid.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image intensities must be finite"));
        }
        Ok(Self(grid))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(Grid::from_fn(rows, cols, f))
    }

    pub fn rows(&self) -> usize {
        self.0.rows
    }

    pub fn cols(&self) -> usize {
        self.0.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0.get(r, c)
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    /// Photographic negative `255 − I`, used to segment bright objects.
    pub fn inverted(&self) -> GrayImage {
        GrayImage(self.0.map(|v| Self::MAX_INTENSITY - v))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GrayImage> {
        GrayImage::new(self.0.map(f))
    }
}

/// First and second partial derivatives of an image. `ixy` is stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeFields {
    pub ix: Grid,
    pub iy: Grid,
    pub ixx: Grid,
    pub ixy: Grid,
    pub iyy: Grid,
    pub halfwidth: usize,
}

/// Default filter half-width: `min(rows, cols) / 100`, clamped to `1..=5`.
pub fn default_halfwidth(rows: usize, cols: usize) -> usize {
    (rows.min(cols) / 100).clamp(1, 5)
}

#[derive(Clone, Copy, PartialEq)]
enum Axis {
    Row,
    Col,
}

/// Derivative along `axis`. Pixels at distance `>= q` from every border use the
/// `(2q+1)²` generalized Prewitt stencil (`q` rows of −1, a zero row, `q` rows
/// of +1), the rest use 3×3 Sobel with replicated borders. Both are scaled so a
/// unit ramp has unit derivative.
fn derivative(g: &Grid, q: usize, axis: Axis) -> Grid {
    let (rows, cols) = (g.rows, g.cols);
    let qi = q as isize;
    // Box sums across the stencil's long side, so the wide stencil costs O(q).
    let mut band = Grid::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let inside = match axis {
                Axis::Row => c >= q && c + q < cols,
                Axis::Col => r >= q && r + q < rows,
            };
            if !inside {
                continue;
            }
            let mut acc = 0.0;
            for d in -qi..=qi {
                acc += match axis {
                    Axis::Row => g.get(r, (c as isize + d) as usize),
                    Axis::Col => g.get((r as isize + d) as usize, c),
                };
            }
            band.set(r, c, acc);
        }
    }
    let prewitt_norm = ((2 * q + 1) * q * (q + 1)) as f64;
    Grid::from_fn(rows, cols, |r, c| {
        let interior = r >= q && r + q < rows && c >= q && c + q < cols;
        let (ri, ci) = (r as isize, c as isize);
        if interior {
            let mut acc = 0.0;
            for d in 1..=q {
                acc += match axis {
                    Axis::Row => band.get(r + d, c) - band.get(r - d, c),
                    Axis::Col => band.get(r, c + d) - band.get(r, c - d),
                };
            }
            acc / prewitt_norm
        } else {
            let v = |dr: isize, dc: isize| g.get_clamped(ri + dr, ci + dc);
            let s = match axis {
                Axis::Row => {
                    (v(1, -1) + 2.0 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2.0 * v(-1, 0) + v(-1, 1))
                }
                Axis::Col => {
                    (v(-1, 1) + 2.0 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2.0 * v(0, -1) + v(1, -1))
                }
            };
            s / 8.0
        }
    })
}

/// Gradient and Hessian fields. Second derivatives reuse the first-derivative
/// operator: `Ixx = Dx(Ix)`, `Ixy = Dy(Ix)`, `Iyy = Dy(Iy)`.
pub fn compute_derivative_fields(img: &GrayImage, q: usize) -> Result<DerivativeFields> {
    if q == 0 {
        return Err(Error::invalid("filter half-width must be at least 1"));
    }
    if 2 * q + 1 >= img.rows().min(img.cols()) {
        return Err(Error::invalid("filter half-width too large for image"));
    }
    let g = img.grid();
    let ix = derivative(g, q, Axis::Row);
    let iy = derivative(g, q, Axis::Col);
    let ixx = derivative(&ix, q, Axis::Row);
    let ixy = derivative(&ix, q, Axis::Col);
    let iyy = derivative(&iy, q, Axis::Col);
    Ok(DerivativeFields { ix, iy, ixx, ixy, iyy, halfwidth: q })
}

/// Corner indices and weights of the bilinear blend at a point, shared by
/// every field of the same shape.
#[derive(Debug, Clone, Copy)]
pub struct Bilinear {
    idx: [usize; 4],
    w: [f64; 4],
    fx: f64,
    fy: f64,
    /// Zero along an axis where the point was clamped, else one.
    live: [f64; 2],
    /// Flat index offset to the previous row / column when the point lies
    /// exactly on an interior grid line along that axis.
    node: [Option<usize>; 2],
}

impl Bilinear {
    /// Points outside the grid are clamped onto it.
    pub fn at(rows: usize, cols: usize, x: f64, y: f64) -> Self {
        let (x0, fx, lx) = split(x, rows);
        let (y0, fy, ly) = split(y, cols);
        let x1 = (x0 + 1).min(rows - 1);
        let y1 = (y0 + 1).min(cols - 1);
        Self {
            idx: [x0 * cols + y0, x1 * cols + y0, x0 * cols + y1, x1 * cols + y1],
            w: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
            fx,
            fy,
            live: [lx, ly],
            node: [
                (fx == 0.0 && x0 > 0 && lx == 1.0).then_some(cols),
                (fy == 0.0 && y0 > 0 && ly == 1.0).then_some(1),
            ],
        }
    }

    #[inline]
    pub fn sample(&self, g: &Grid) -> f64 {
        let d = &g.data;
        d[self.idx[0]] * self.w[0]
            + d[self.idx[1]] * self.w[1]
            + d[self.idx[2]] * self.w[2]
            + d[self.idx[3]] * self.w[3]
    }

    /// Partial derivatives `(∂/∂x, ∂/∂y)` of the interpolant at the point.
    /// On an interior grid line the interpolant has a kink across it, and the
    /// mean of the two one-sided slopes is returned. Zero along a clamped axis.
    #[inline]
    pub fn gradient(&self, g: &Grid) -> (f64, f64) {
        let d = &g.data;
        let [v00, v10, v01, v11] = self.idx.map(|i| d[i]);
        let mut dx = (1.0 - self.fy) * (v10 - v00) + self.fy * (v11 - v01);
        let mut dy = (1.0 - self.fx) * (v01 - v00) + self.fx * (v11 - v10);
        if let Some(step) = self.node[0] {
            let back = (1.0 - self.fy) * (v00 - d[self.idx[0] - step]) + self.fy * (v01 - d[self.idx[2] - step]);
            dx = 0.5 * (dx + back);
        }
        if let Some(step) = self.node[1] {
            let back = (1.0 - self.fx) * (v00 - d[self.idx[0] - step]) + self.fx * (v10 - d[self.idx[1] - step]);
            dy = 0.5 * (dy + back);
        }
        (dx * self.live[0], dy * self.live[1])
    }
}

/// Integer cell, fractional offset, and whether `v` was inside `[0, n-1]`.
#[inline]
fn split(v: f64, n: usize) -> (usize, f64, f64) {
    let max = (n - 1) as f64;
    let inside = if (0.0..=max).contains(&v) { 1.0 } else { 0.0 };
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, max) };
    let f = libm::floor(v);
    if f >= max && n > 1 {
        (n - 2, 1.0, inside)
    } else {
        (f as usize, v - f, inside)
    }
}

/// Bilinear interpolation of `g` at `(x, y)`.
pub fn bilinear_sample(g: &Grid, x: f64, y: f64) -> f64 {
    Bilinear::at(g.rows, g.cols, x, y).sample(g)
}

/// Per-row running sums: `prefix(j, l)` is the sum of the first `l` pixels of
/// row `j`, so `prefix(j, 0) = 0` and any horizontal strip sum is O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct RowPrefixTable {
    rows: usize,
    cols: usize,
    prefix: Vec<f64>,
}

impl RowPrefixTable {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, l: usize) -> f64 {
        self.prefix[row * (self.cols + 1) + l]
    }

    /// Sum over the inclusive rectangle.
    pub fn rect_sum(&self, rows: core::ops::RangeInclusive<usize>, cols: core::ops::RangeInclusive<usize>) -> f64 {
        let (c0, c1) = (*cols.start(), *cols.end());
        rows.map(|j| self.get(j, c1 + 1) - self.get(j, c0)).sum()
    }
}

pub fn build_row_prefix(img: &GrayImage) -> RowPrefixTable {
    let (rows, cols) = (img.rows(), img.cols());
    let mut prefix = Vec::with_capacity(rows * (cols + 1));
    for r in 0..rows {
        let mut acc = 0.0;
        prefix.push(0.0);
        for c in 0..cols {
            acc += img.get(r, c);
            prefix.push(acc);
        }
    }
    RowPrefixTable { rows, cols, prefix }
}
