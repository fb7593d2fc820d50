//! Subdivision schemes and exact evaluation of their limit curves.
//!
//! A closed subdivision curve with control points `p_0 .. p_{M-1}` is
//! `r(t) = Σ_j p_j φ(t - j)` where `φ` is the scheme's basic limit function
//! and indices wrap modulo `M`. [`BasicFunctionTable`] stores `φ` and `φ'` at
//! every dyadic offset `m / 2^k` inside the support, so evaluating the curve at
//! the `2^k M` parameters `i / 2^k` is a short weighted sum per sample.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{signed_area, wrap, Point};

/// Upper end of the tension range for which the four-point limit curve has a
/// continuous tangent, `(√5 − 1) / 8`.
pub const FOUR_POINT_C1_LIMIT: f64 = 0.154_508_497_187_473_7;

/// Refinement depths accepted by [`BasicFunctionTable::new`].
pub const MAX_DEPTH: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Dyn–Levin–Gregory interpolatory scheme with tension `omega`.
    FourPoint { omega: f64 },
    /// Chaikin-style cubic B-spline scheme (approximating).
    CubicBSpline,
}

impl Scheme {
    pub const DEFAULT_OMEGA: f64 = 1.0 / 16.0;

    /// Four-point scheme with the standard tension 1/16.
    pub const fn four_point() -> Self {
        Scheme::FourPoint { omega: Self::DEFAULT_OMEGA }
    }

    /// Four-point scheme with a custom tension; rejected outside `(0, (√5−1)/8)`.
    pub fn four_point_with_tension(omega: f64) -> Result<Self> {
        let s = Scheme::FourPoint { omega };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Scheme::FourPoint { omega } if !(omega > 0.0 && omega < FOUR_POINT_C1_LIMIT) => Err(
                Error::invalid("four-point tension must lie in (0, (sqrt(5)-1)/8)"),
            ),
            _ => Ok(()),
        }
    }

    /// Fewest control points a closed polygon may have under this scheme.
    pub fn min_points(&self) -> usize {
        match self {
            Scheme::FourPoint { .. } => 4,
            Scheme::CubicBSpline => 3,
        }
    }

    /// `φ` vanishes outside `(-s, s)` for this half-width `s`.
    pub fn support_radius(&self) -> usize {
        match self {
            Scheme::FourPoint { .. } => 3,
            Scheme::CubicBSpline => 2,
        }
    }

    pub fn is_interpolatory(&self) -> bool {
        matches!(self, Scheme::FourPoint { .. })
    }

    fn even(&self, prev: Point, cur: Point, next: Point) -> Point {
        match self {
            Scheme::FourPoint { .. } => cur,
            Scheme::CubicBSpline => prev * 0.125 + cur * 0.75 + next * 0.125,
        }
    }

    /// New vertex between `a1` and `a2`; `a0`, `a3` are their outer neighbours.
    fn odd(&self, a0: Point, a1: Point, a2: Point, a3: Point) -> Point {
        match *self {
            Scheme::FourPoint { omega } => (a1 + a2) * (omega + 0.5) - (a0 + a3) * omega,
            Scheme::CubicBSpline => (a1 + a2) * 0.5,
        }
    }
}

/// One round of subdivision.
///
/// Closed polygons are treated as periodic and come back with `2M` vertices,
/// the even and odd vertices interleaved (`out[2i]`, `out[2i+1]`). Open
/// polygons are a window onto a longer sequence: only refined vertices whose
/// stencils fit inside the window are produced, from the even vertex of input
/// index 1 to the even vertex of input index `n - 2` (`2n - 5` points).
pub fn refine_once(points: &[Point], scheme: Scheme, closed: bool) -> Result<Vec<Point>> {
    scheme.validate()?;
    let n = points.len();
    let required = if closed { scheme.min_points() } else { 4 };
    if n < required {
        return Err(Error::TooFewPoints { required, got: n });
    }
    if closed {
        let at = |i: i64| points[wrap(i, n)];
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n as i64 {
            out.push(scheme.even(at(i - 1), at(i), at(i + 1)));
            out.push(scheme.odd(at(i - 1), at(i), at(i + 1), at(i + 2)));
        }
        Ok(out)
    } else {
        let mut out = Vec::with_capacity(2 * n - 5);
        for i in 1..n - 1 {
            out.push(scheme.even(points[i - 1], points[i], points[i + 1]));
            if i + 2 < n {
                out.push(scheme.odd(points[i - 1], points[i], points[i + 1], points[i + 2]));
            }
        }
        Ok(out)
    }
}

/// Basic limit function `φ` and its derivative tabulated on the dyadic grid
/// `m / 2^k`, `|m| ≤ s·2^k` where `s` is the support half-width.
///
/// `dphi` is the derivative with respect to the curve parameter `t`, so the
/// tangent `dr/dt` at a sample is `Σ_j p_j φ'(i/2^k - j)` at every depth.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicFunctionTable {
    scheme: Scheme,
    depth: u32,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

impl BasicFunctionTable {
    /// Refines delta data `k` times and reads `φ`, `φ'` off the refined
    /// polygon with the scheme's exact limit-position and tangent stencils.
    pub fn new(scheme: Scheme, depth: u32) -> Result<Self> {
        scheme.validate()?;
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::invalid("table depth must be in 1..=12"));
        }
        let s = scheme.support_radius() as i64;
        // Each open refinement trims one sample from each end, which shrinks
        // the covered parameter interval by less than 2 in total.
        let pad = s + 4;
        let mut poly: Vec<Point> = (-pad..=pad)
            .map(|i| Point::new(i as f64, if i == 0 { 1.0 } else { 0.0 }))
            .collect();
        // Index of parameter 0 in `poly`, tracked through the refinements.
        let mut origin = pad as usize;
        for _ in 0..depth {
            poly = refine_once(&poly, scheme, false)?;
            origin = 2 * origin - 2;
        }
        let scale = (1u64 << depth) as f64;
        let half = s * (1i64 << depth);
        let value = |m: i64| poly[(origin as i64 + m) as usize].y;

        let mut phi = Vec::with_capacity((2 * half + 1) as usize);
        let mut dphi = Vec::with_capacity((2 * half + 1) as usize);
        for m in -half..=half {
            let (v, d) = match scheme {
                Scheme::FourPoint { omega } => {
                    let d = scale / (1.0 - 4.0 * omega)
                        * (0.5 * (value(m + 1) - value(m - 1))
                            - omega * (value(m + 2) - value(m - 2)));
                    (value(m), d)
                }
                Scheme::CubicBSpline => {
                    let v = (value(m - 1) + 4.0 * value(m) + value(m + 1)) / 6.0;
                    let d = scale * 0.5 * (value(m + 1) - value(m - 1));
                    (v, d)
                }
            };
            phi.push(v);
            dphi.push(d);
        }
        // The ends of the support are exact zeros; clear roundoff there.
        phi[0] = 0.0;
        dphi[0] = 0.0;
        let last = phi.len() - 1;
        phi[last] = 0.0;
        dphi[last] = 0.0;
        Ok(Self { scheme, depth, phi, dphi })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Samples per unit parameter, `2^k`.
    pub fn samples_per_span(&self) -> usize {
        1 << self.depth
    }

    /// Largest `|m|` stored.
    pub fn half_width(&self) -> i64 {
        (self.scheme.support_radius() << self.depth) as i64
    }

    /// `φ(m / 2^k)`; zero outside the support.
    pub fn phi(&self, m: i64) -> f64 {
        let h = self.half_width();
        if m.abs() > h {
            0.0
        } else {
            self.phi[(m + h) as usize]
        }
    }

    /// `φ'(m / 2^k)`; zero outside the support.
    pub fn dphi(&self, m: i64) -> f64 {
        let h = self.half_width();
        if m.abs() > h {
            0.0
        } else {
            self.dphi[(m + h) as usize]
        }
    }

    /// Offsets `m` with `φ(m/2^k)` possibly nonzero, i.e. the open support.
    pub fn offsets(&self) -> core::ops::RangeInclusive<i64> {
        let h = self.half_width();
        -(h - 1)..=(h - 1)
    }

    /// Sample indices influenced by control point `j` of an `m_count`-gon,
    /// paired with the table offset `i - j·2^k` (before wrapping). A sample may
    /// appear more than once when the support is wider than the period.
    pub fn support_of(
        &self,
        j: usize,
        m_count: usize,
    ) -> impl Iterator<Item = (usize, i64)> + '_ {
        let n = m_count << self.depth;
        let base = (j << self.depth) as i64;
        self.offsets().map(move |m| (wrap(base + m, n), m))
    }
}

/// A closed control polygon tied to its subdivision scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolygon {
    scheme: Scheme,
    vertices: Vec<Point>,
}

impl ControlPolygon {
    pub fn new(scheme: Scheme, vertices: Vec<Point>) -> Result<Self> {
        scheme.validate()?;
        if vertices.len() < scheme.min_points() {
            return Err(Error::TooFewPoints { required: scheme.min_points(), got: vertices.len() });
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("control point coordinates must be finite"));
        }
        Ok(Self { scheme, vertices })
    }

    /// Control points evenly spaced on a circle, counterclockwise in `(x, y)`.
    pub fn circle(scheme: Scheme, center: Point, radius: f64, count: usize) -> Result<Self> {
        let pts = (0..count)
            .map(|i| {
                let a = 2.0 * core::f64::consts::PI * i as f64 / count as f64;
                center + Point::new(libm::cos(a), libm::sin(a)) * radius
            })
            .collect();
        Self::new(scheme, pts)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Same curve traversed backwards: `p'_j = p_{-j}`, so `r'(t) = r(-t)`.
    pub fn reversed(&self) -> Self {
        let n = self.vertices.len();
        let vertices = (0..n).map(|j| self.vertices[(n - j) % n]).collect();
        Self { scheme: self.scheme, vertices }
    }
}

/// The `2^k M` on-curve samples `r(i/2^k)` and tangents `r'(i/2^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub points: Vec<Point>,
    pub tangents: Vec<Point>,
    pub depth: u32,
    /// Number of control points `M` the sample was generated from.
    pub control_count: usize,
}

impl CurveSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shoelace area of the sample polygon.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }
}

/// Evaluates the curve and its tangent at every dyadic parameter `i / 2^k`.
pub fn evaluate_curve(polygon: &ControlPolygon, table: &BasicFunctionTable) -> Result<CurveSample> {
    if polygon.scheme() != table.scheme() {
        return Err(Error::SchemeMismatch);
    }
    Ok(evaluate_points(polygon.vertices(), table))
}

/// [`evaluate_curve`] on a bare vertex slice whose scheme already matches.
pub(crate) fn evaluate_points(vertices: &[Point], table: &BasicFunctionTable) -> CurveSample {
    let m_count = vertices.len();
    let k = table.depth();
    let step = table.samples_per_span() as i64;
    let n = m_count << k;
    let reach = table.scheme().support_radius() as i64;
    let mut points = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    for i in 0..n as i64 {
        let base = i.div_euclid(step);
        let mut p = Point::ZERO;
        let mut t = Point::ZERO;
        for j in base - reach + 1..=base + reach {
            let m = i - j * step;
            let v = vertices[wrap(j, m_count)];
            p += v * table.phi(m);
            t += v * table.dphi(m);
        }
        points.push(p);
        tangents.push(t);
    }
    CurveSample { points, tangents, depth: k, control_count: m_count }
}

/// First column of `(S^∞)^{-1}`, where `S^∞` is the circulant matrix with
/// first column `(2/3, 1/6, 0, …, 0, 1/6)` mapping cubic B-spline control
/// points to the curve points `r(i)`. Built from the closed-form inverse of
/// its Fourier eigenvalues `2/3 + cos(2πs/M)/3`.
pub fn interpolation_column(m_count: usize) -> Vec<f64> {
    use core::f64::consts::PI;
    let mf = m_count as f64;
    let eig_inv = |t: usize| 1.0 / (2.0 / 3.0 + libm::cos(2.0 * PI * t as f64 / mf) / 3.0);
    (0..m_count)
        .map(|s| {
            let mut acc = 1.0 / mf;
            let pairs = if m_count.is_multiple_of(2) {
                acc += 3.0 / mf * if s % 2 == 0 { 1.0 } else { -1.0 };
                m_count / 2 - 1
            } else {
                m_count / 2
            };
            for t in 1..=pairs {
                acc += 2.0 / mf * eig_inv(t) * libm::cos(2.0 * PI * (s * t) as f64 / mf);
            }
            acc
        })
        .collect()
}

/// Dense `M × M` interpolation operator `A = (S^∞)^{-1}`, row-major.
pub fn interpolation_matrix(m_count: usize) -> Vec<f64> {
    let col = interpolation_column(m_count);
    let mut a = vec![0.0; m_count * m_count];
    for s in 0..m_count {
        for t in 0..m_count {
            a[s * m_count + t] = col[(s + m_count - t) % m_count];
        }
    }
    a
}

/// Control polygon of the closed cubic B-spline curve passing through
/// `targets` at the integer parameters.
pub fn interpolation_operator(targets: &ControlPolygon) -> Result<ControlPolygon> {
    if targets.scheme() != Scheme::CubicBSpline {
        return Err(Error::SchemeMismatch);
    }
    let m_count = targets.len();
    let col = interpolation_column(m_count);
    let src = targets.vertices();
    let vertices = (0..m_count)
        .map(|s| {
            let mut acc = Point::ZERO;
            for (t, &p) in src.iter().enumerate() {
                acc += p * col[(s + m_count - t) % m_count];
            }
            acc
        })
        .collect();
    ControlPolygon::new(Scheme::CubicBSpline, vertices)
}

/// Applies `S^∞`: cubic B-spline curve points at the integer parameters.
pub fn bspline_limit_points(control: &[Point]) -> Vec<Point> {
    let n = control.len();
    (0..n as i64)
        .map(|i| {
            control[wrap(i - 1, n)] * (1.0 / 6.0)
                + control[wrap(i, n)] * (4.0 / 6.0)
                + control[wrap(i + 1, n)] * (1.0 / 6.0)
        })
        .collect()
}
