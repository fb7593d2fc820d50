//! Snake energies and their gradients with respect to the control points.
//!
//! Gradients are laid out as `(∂/∂x_0, ∂/∂y_0, ∂/∂x_1, ∂/∂y_1, …)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imaging::{
    build_row_prefix, compute_derivative_fields, default_halfwidth, Bilinear, DerivativeFields,
    GrayImage, RowPrefixTable,
};
use crate::raster::{rasterize_snake, BoundaryRaster, RegionIntegrals};
use crate::subdiv::{evaluate_points, BasicFunctionTable, ControlPolygon, CurveSample};

/// Which side of the edge is the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    DarkObject,
    /// Segmented on the negative image `255 − I`.
    BrightObject,
}

/// Inclusive pixel rectangle `R` that contains the object and the snake.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionBox {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl RegionBox {
    pub fn new(row_min: usize, row_max: usize, col_min: usize, col_max: usize) -> Result<Self> {
        if row_min > row_max || col_min > col_max {
            return Err(Error::invalid("region box bounds are inverted"));
        }
        Ok(Self { row_min, row_max, col_min, col_max })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self { row_min: 0, row_max: rows - 1, col_min: 0, col_max: cols - 1 }
    }

    pub fn area(&self) -> f64 {
        ((self.row_max - self.row_min + 1) * (self.col_max - self.col_min + 1)) as f64
    }

    /// `(I_R, |R|)`.
    pub fn integrals(&self, prefix: &RowPrefixTable) -> Result<RegionIntegrals> {
        if self.row_max >= prefix.rows() || self.col_max >= prefix.cols() {
            return Err(Error::invalid("region box exceeds the image"));
        }
        Ok(RegionIntegrals {
            intensity: prefix.rect_sum(self.row_min..=self.row_max, self.col_min..=self.col_max),
            area: self.area(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Weight of the gradient energy; the region energy gets `1 − alpha`.
    pub alpha: f64,
    pub depth: u32,
    pub polarity: Polarity,
    pub region: RegionBox,
    /// Derivative filter half-width; `None` picks it from the image size.
    pub filter_halfwidth: Option<usize>,
}

impl EnergyParams {
    pub fn new(region: RegionBox) -> Self {
        Self { alpha: 0.5, depth: 4, polarity: Polarity::DarkObject, region, filter_halfwidth: None }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::invalid("alpha must lie in [0, 1]"))
    }
}

/// Total energy, its parts, and the gradient of the total.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub e_grad: f64,
    pub e_reg: f64,
}

impl EnergyEval {
    pub fn grad_norm(&self) -> f64 {
        libm::sqrt(self.grad.iter().map(|g| g * g).sum())
    }
}

/// `(1/N) Σ_i [Iy(r_i)·tx_i − Ix(r_i)·ty_i]`, `N` the sample count.
pub fn gradient_energy(sample: &CurveSample, fields: &DerivativeFields) -> f64 {
    let (rows, cols) = (fields.ix.rows(), fields.ix.cols());
    let mut acc = 0.0;
    for (p, t) in sample.points.iter().zip(&sample.tangents) {
        let b = Bilinear::at(rows, cols, p.x, p.y);
        acc += b.sample(&fields.iy) * t.x - b.sample(&fields.ix) * t.y;
    }
    acc / sample.len() as f64
}

/// Exact gradient of [`gradient_energy`]. The second derivatives of the image
/// are taken from the bilinear interpolant of `(Ix, Iy)`, the same surface the
/// energy samples, so the result agrees with finite differences of the energy.
pub fn gradient_energy_grad(
    sample: &CurveSample,
    table: &BasicFunctionTable,
    fields: &DerivativeFields,
) -> Vec<f64> {
    let (rows, cols) = (fields.ix.rows(), fields.ix.cols());
    grad_energy_grad_with(sample, table, |p| {
        let b = Bilinear::at(rows, cols, p.x, p.y);
        let (ixx, ixy) = b.gradient(&fields.ix);
        let (iyx, iyy) = b.gradient(&fields.iy);
        (b.sample(&fields.ix), b.sample(&fields.iy), ixx, ixy, iyx, iyy)
    })
}

/// Gradient of [`gradient_energy`] using the filtered second-derivative
/// fields `Ixx`, `Ixy`, `Iyy`. Close to [`gradient_energy_grad`] on smooth
/// images, but not the exact derivative of the sampled energy.
pub fn gradient_energy_grad_filtered(
    sample: &CurveSample,
    table: &BasicFunctionTable,
    fields: &DerivativeFields,
) -> Vec<f64> {
    let (rows, cols) = (fields.ix.rows(), fields.ix.cols());
    grad_energy_grad_with(sample, table, |p| {
        let b = Bilinear::at(rows, cols, p.x, p.y);
        let ixy = b.sample(&fields.ixy);
        (b.sample(&fields.ix), b.sample(&fields.iy), b.sample(&fields.ixx), ixy, ixy, b.sample(&fields.iyy))
    })
}

/// `local(p)` returns `(Ix, Iy, ∂x Ix, ∂y Ix, ∂x Iy, ∂y Iy)` at `p`.
fn grad_energy_grad_with(
    sample: &CurveSample,
    table: &BasicFunctionTable,
    local: impl Fn(Point) -> (f64, f64, f64, f64, f64, f64),
) -> Vec<f64> {
    // Per-sample factors; the control-point sums below only reweight them.
    let mut px = Vec::with_capacity(sample.len());
    let mut py = Vec::with_capacity(sample.len());
    let mut dx = Vec::with_capacity(sample.len());
    let mut dy = Vec::with_capacity(sample.len());
    for (p, t) in sample.points.iter().zip(&sample.tangents) {
        let (ix, iy, ixx, ixy, iyx, iyy) = local(*p);
        px.push(iyx * t.x - ixx * t.y);
        py.push(iyy * t.x - ixy * t.y);
        dx.push(iy);
        dy.push(-ix);
    }
    let m_count = sample.control_count;
    let scale = 1.0 / sample.len() as f64;
    let mut grad = vec![0.0; 2 * m_count];
    for j in 0..m_count {
        let (mut gx, mut gy) = (0.0, 0.0);
        for (i, m) in table.support_of(j, m_count) {
            let (phi, dphi) = (table.phi(m), table.dphi(m));
            gx += px[i] * phi + dx[i] * dphi;
            gy += py[i] * phi + dy[i] * dphi;
        }
        grad[2 * j] = gx * scale;
        grad[2 * j + 1] = gy * scale;
    }
    grad
}

/// Means inside the snake and in the rest of the box, with the quantities the
/// gradient needs.
#[derive(Debug, Clone, Copy)]
struct Contrast {
    value: f64,
    d: f64,
    g: f64,
    h: f64,
}

/// Strip sums over the even-odd interior. For simple counterclockwise snakes
/// these are the signed sums; a snake that crosses itself still describes a
/// genuine pixel set, so the means stay within the intensity range.
fn enclosed(raster: &BoundaryRaster, prefix: &RowPrefixTable) -> Result<RegionIntegrals> {
    raster.even_odd_integrals(prefix)
}

fn contrast(omega: RegionIntegrals, region: RegionIntegrals) -> Result<Contrast> {
    let outside_area = region.area - omega.area;
    if omega.area <= 0.0 || outside_area <= 0.0 {
        return Err(Error::DegenerateRegion { area: omega.area });
    }
    let outside = region.intensity - omega.intensity;
    let a = omega.intensity / omega.area;
    let b = outside / outside_area;
    let d = a - b;
    Ok(Contrast {
        value: -d * d,
        d,
        g: omega.intensity / (omega.area * omega.area) + outside / (outside_area * outside_area),
        h: 1.0 / omega.area + 1.0 / outside_area,
    })
}

/// `−(I_Ω/|Ω| − (I_R − I_Ω)/(|R| − |Ω|))²` from the rasterized strip sums.
pub fn region_energy(sample: &CurveSample, region: &RegionBox, prefix: &RowPrefixTable) -> Result<f64> {
    let raster = rasterize_snake(sample, prefix.rows(), prefix.cols())?;
    let omega = enclosed(&raster, prefix)?;
    Ok(contrast(omega, region.integrals(prefix)?)?.value)
}

/// Analytic gradient of [`region_energy`], from the boundary-variation form of
/// the region integrals.
pub fn region_energy_grad(
    sample: &CurveSample,
    table: &BasicFunctionTable,
    image: &GrayImage,
    region: &RegionBox,
    prefix: &RowPrefixTable,
) -> Result<Vec<f64>> {
    let raster = rasterize_snake(sample, prefix.rows(), prefix.cols())?;
    let c = contrast(enclosed(&raster, prefix)?, region.integrals(prefix)?)?;
    Ok(region_grad_from(sample, table, image, c))
}

fn region_grad_from(
    sample: &CurveSample,
    table: &BasicFunctionTable,
    image: &GrayImage,
    c: Contrast,
) -> Vec<f64> {
    let grid = image.grid();
    let weights: Vec<f64> = sample
        .points
        .iter()
        .map(|p| c.g - c.h * Bilinear::at(grid.rows(), grid.cols(), p.x, p.y).sample(grid))
        .collect();
    let m_count = sample.control_count;
    let scale = 2.0 * c.d / table.samples_per_span() as f64;
    let mut grad = vec![0.0; 2 * m_count];
    for j in 0..m_count {
        let (mut gx, mut gy) = (0.0, 0.0);
        for (i, m) in table.support_of(j, m_count) {
            let w = weights[i] * table.phi(m);
            let t = sample.tangents[i];
            gx += w * t.y;
            gy -= w * t.x;
        }
        grad[2 * j] = gx * scale;
        grad[2 * j + 1] = gy * scale;
    }
    grad
}

/// Everything derived from one image that energy evaluation needs, plus the
/// basic-function table. Immutable; share it between sessions.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    image: GrayImage,
    fields: DerivativeFields,
    prefix: RowPrefixTable,
    table: Arc<BasicFunctionTable>,
    params: EnergyParams,
    region: RegionIntegrals,
}

impl EnergyModel {
    /// `image` is the raw image; the polarity in `params` is applied here.
    pub fn new(image: &GrayImage, table: Arc<BasicFunctionTable>, params: EnergyParams) -> Result<Self> {
        params.validate()?;
        if table.depth() != params.depth {
            return Err(Error::invalid("table depth does not match the energy parameters"));
        }
        let image = match params.polarity {
            Polarity::DarkObject => image.clone(),
            Polarity::BrightObject => image.inverted(),
        };
        let q = params.filter_halfwidth.unwrap_or_else(|| default_halfwidth(image.rows(), image.cols()));
        let fields = compute_derivative_fields(&image, q)?;
        let prefix = build_row_prefix(&image);
        let region = params.region.integrals(&prefix)?;
        Ok(Self { image, fields, prefix, table, params, region })
    }

    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn fields(&self) -> &DerivativeFields {
        &self.fields
    }

    pub fn prefix(&self) -> &RowPrefixTable {
        &self.prefix
    }

    pub fn table(&self) -> &Arc<BasicFunctionTable> {
        &self.table
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn sample(&self, vertices: &[Point]) -> CurveSample {
        evaluate_points(vertices, &self.table)
    }

    pub fn raster(&self, sample: &CurveSample) -> Result<BoundaryRaster> {
        rasterize_snake(sample, self.image.rows(), self.image.cols())
    }

    /// Checks `polygon` against the table and returns it traversed
    /// counterclockwise. Curves enclosing 4 square pixels or less are rejected.
    pub fn normalize_orientation(&self, polygon: &ControlPolygon) -> Result<ControlPolygon> {
        if polygon.scheme() != self.table.scheme() {
            return Err(Error::SchemeMismatch);
        }
        let area = self.sample(polygon.vertices()).signed_area();
        if !area.is_finite() || area.abs() <= 4.0 {
            return Err(Error::DegenerateRegion { area });
        }
        Ok(if area < 0.0 { polygon.reversed() } else { polygon.clone() })
    }

    /// `α·E_grad + (1 − α)·E_reg` and its gradient, from one curve sample and
    /// one raster.
    pub fn evaluate(&self, vertices: &[Point], alpha: f64) -> Result<EnergyEval> {
        check_alpha(alpha)?;
        if vertices.len() < self.table.scheme().min_points() {
            return Err(Error::TooFewPoints { required: self.table.scheme().min_points(), got: vertices.len() });
        }
        let sample = self.sample(vertices);
        let raster = self.raster(&sample)?;
        let c = contrast(enclosed(&raster, &self.prefix)?, self.region)?;
        let e_grad = gradient_energy(&sample, &self.fields);
        let gg = gradient_energy_grad(&sample, &self.table, &self.fields);
        let gr = region_grad_from(&sample, &self.table, &self.image, c);
        let grad = gg.iter().zip(&gr).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        Ok(EnergyEval { value: alpha * e_grad + (1.0 - alpha) * c.value, grad, e_grad, e_reg: c.value })
    }
}

/// One-shot evaluation of the blended energy; builds every cache.
pub fn total_energy(
    polygon: &ControlPolygon,
    image: &GrayImage,
    params: &EnergyParams,
) -> Result<EnergyEval> {
    let table = Arc::new(BasicFunctionTable::new(polygon.scheme(), params.depth)?);
    EnergyModel::new(image, table, *params)?.evaluate(polygon.vertices(), params.alpha)
}
