//! Text formats shared by the CLI and the HTTP service: polygon JSON,
//! option strings, trace JSON lines and boundary CSV.

use serde::{Deserialize, Serialize};
use subsnake_core::optimize::{IterationRecord, Status, StepEvent};
use subsnake_core::raster::BoundaryPixel;
use subsnake_core::{interpolation_operator, AlphaSchedule, ControlPolygon, Point, RegionBox, Scheme};

use crate::error::{HarnessError, Result};

pub const FOUR_POINT: &str = "four-point";
pub const CUBIC_BSPLINE: &str = "cubic-bspline";

/// `four-point` (optional tension `omega`) or `cubic-bspline`.
pub fn parse_scheme(name: &str, omega: Option<f64>) -> Result<Scheme> {
    match (name, omega) {
        (FOUR_POINT, None) => Ok(Scheme::four_point()),
        (FOUR_POINT, Some(w)) => Ok(Scheme::four_point_with_tension(w)?),
        (CUBIC_BSPLINE, None) => Ok(Scheme::CubicBSpline),
        (CUBIC_BSPLINE, Some(_)) => Err(HarnessError::invalid("omega only applies to the four-point scheme")),
        _ => Err(HarnessError::invalid(format!("unknown scheme {name:?}"))),
    }
}

pub fn scheme_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::FourPoint { .. } => FOUR_POINT,
        Scheme::CubicBSpline => CUBIC_BSPLINE,
    }
}

fn scheme_omega(scheme: Scheme) -> Option<f64> {
    match scheme {
        Scheme::FourPoint { omega } if omega != Scheme::DEFAULT_OMEGA => Some(omega),
        _ => None,
    }
}

/// How the points of a polygon file are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointRole {
    /// Points the curve should pass through. For the B-spline they are mapped
    /// to control points; four-point curves interpolate them already.
    #[default]
    Targets,
    Control,
}

/// `{"scheme": "...", "omega": w?, "role": "targets"|"control", "points": [[row, col], ...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonFile {
    pub scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default)]
    pub role: PointRole,
    pub points: Vec<[f64; 2]>,
}

impl PolygonFile {
    /// Control points of the final polygon, written so that reading the file
    /// back gives the same polygon.
    pub fn from_control(polygon: &ControlPolygon) -> Self {
        Self {
            scheme: scheme_name(polygon.scheme()).to_owned(),
            omega: scheme_omega(polygon.scheme()),
            role: PointRole::Control,
            points: polygon.vertices().iter().map(|p| [p.x, p.y]).collect(),
        }
    }

    pub fn scheme(&self) -> Result<Scheme> {
        parse_scheme(&self.scheme, self.omega)
    }

    pub fn to_control(&self) -> Result<ControlPolygon> {
        let points = self.points.iter().map(|&[r, c]| Point::new(r, c)).collect();
        resolve(ControlPolygon::new(self.scheme()?, points)?, self.role)
    }
}

fn resolve(polygon: ControlPolygon, role: PointRole) -> Result<ControlPolygon> {
    Ok(match (role, polygon.scheme()) {
        (PointRole::Targets, Scheme::CubicBSpline) => interpolation_operator(&polygon)?,
        _ => polygon,
    })
}

/// Evenly spaced targets on a circle, resolved to control points.
pub fn circle_polygon(scheme: Scheme, center: Point, radius: f64, count: usize) -> Result<ControlPolygon> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(HarnessError::invalid("circle radius must be positive"));
    }
    resolve(ControlPolygon::circle(scheme, center, radius, count)?, PointRole::Targets)
}

fn numbers(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| HarnessError::invalid(format!("{what}: expected {n} comma-separated numbers, got {s:?}")))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(HarnessError::invalid(format!("{what}: expected {n} comma-separated numbers, got {s:?}")));
    }
    Ok(v)
}

fn index(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(HarnessError::invalid(format!("{what}: {v} is not a pixel index")))
    }
}

/// `row,col,radius,count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSpec {
    pub center: Point,
    pub radius: f64,
    pub count: usize,
}

pub fn parse_circle(s: &str) -> Result<CircleSpec> {
    let v = numbers(s, 4, "circle")?;
    Ok(CircleSpec { center: Point::new(v[0], v[1]), radius: v[2], count: index(v[3], "circle")? })
}

/// `r0,r1,c0,c1`, inclusive.
pub fn parse_box(s: &str) -> Result<RegionBox> {
    let v = numbers(s, 4, "box")?;
    Ok(RegionBox::new(index(v[0], "box")?, index(v[1], "box")?, index(v[2], "box")?, index(v[3], "box")?)?)
}

/// `two-phase`, `two-phase:A1,A2` or `fixed:A`.
pub fn parse_alpha(s: &str) -> Result<AlphaSchedule> {
    let schedule = match s.split_once(':') {
        None if s == "two-phase" => AlphaSchedule::default(),
        Some(("two-phase", rest)) => {
            let v = numbers(rest, 2, "alpha")?;
            AlphaSchedule::TwoPhase { first: v[0], second: v[1] }
        }
        Some(("fixed", rest)) => AlphaSchedule::Fixed(numbers(rest, 1, "alpha")?[0]),
        _ => return Err(HarnessError::invalid(format!("alpha mode must be fixed:V or two-phase, got {s:?}"))),
    };
    let valid = |a: f64| (0.0..=1.0).contains(&a);
    match schedule {
        AlphaSchedule::Fixed(a) if valid(a) => Ok(schedule),
        AlphaSchedule::TwoPhase { first, second } if valid(first) && valid(second) => Ok(schedule),
        _ => Err(HarnessError::invalid("alpha values must lie in [0, 1]")),
    }
}

pub fn alpha_string(schedule: AlphaSchedule) -> String {
    match schedule {
        AlphaSchedule::Fixed(a) => format!("fixed:{a}"),
        AlphaSchedule::TwoPhase { first, second } => format!("two-phase:{first},{second}"),
    }
}

pub fn status_name(status: Status) -> &'static str {
    match status {
        Status::Running => "running",
        Status::Converged => "converged",
        Status::MaxIters => "max-iters",
        Status::Degenerate => "degenerate",
    }
}

pub fn event_name(event: StepEvent) -> &'static str {
    match event {
        StepEvent::Start => "start",
        StepEvent::Step => "step",
        StepEvent::PhaseSwitch => "phase-switch",
        StepEvent::Reset => "reset",
        StepEvent::Converged => "converged",
        StepEvent::MaxIters => "max-iters",
        StepEvent::Degenerate => "degenerate",
    }
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub iteration: usize,
    pub event: String,
    pub alpha: f64,
    pub energy: f64,
    pub e_grad: f64,
    pub e_reg: f64,
    pub grad_norm: f64,
    pub max_displacement: f64,
}

impl From<&IterationRecord> for TraceLine {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iteration: r.iteration,
            event: event_name(r.event).to_owned(),
            alpha: r.alpha,
            energy: r.e_total,
            e_grad: r.e_grad,
            e_reg: r.e_reg,
            grad_norm: r.grad_norm,
            max_displacement: r.max_displacement,
        }
    }
}

/// One JSON object per record, newline terminated.
pub fn trace_jsonl(records: &[IterationRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&TraceLine::from(r))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_trace_jsonl(text: &str) -> Result<Vec<TraceLine>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

/// `edge,row,col,sign` with a header row.
pub fn boundary_csv(pixels: &[BoundaryPixel]) -> String {
    let mut out = String::from("edge,row,col,sign\n");
    for p in pixels {
        out.push_str(&format!("{},{},{},{}\n", p.edge, p.row, p.col, p.sign));
    }
    out
}
