//! Limited-memory BFGS over the control-point coordinates with a strong-Wolfe
//! line search and the two-phase α schedule.
//!
//! The variables are raw pixel coordinates, so every distance tolerance is in
//! pixels. The driver is incremental: [`SnakeOptimizer::step`] performs one
//! accepted step and [`minimize`] just calls it until the run ends.

use alloc::collections::VecDeque;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::energy::{check_alpha, EnergyEval, EnergyModel};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::subdiv::ControlPolygon;

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 30;
const MAX_ZOOM: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    Fixed(f64),
    /// Runs with `first` until the snake stabilizes, then with `second`.
    TwoPhase { first: f64, second: f64 },
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule::TwoPhase { first: 0.1, second: 0.9 }
    }
}

impl AlphaSchedule {
    fn phase_alpha(&self, phase: usize) -> f64 {
        match *self {
            AlphaSchedule::Fixed(a) => a,
            AlphaSchedule::TwoPhase { first, second } => {
                if phase == 0 {
                    first
                } else {
                    second
                }
            }
        }
    }

    fn phases(&self) -> usize {
        match self {
            AlphaSchedule::Fixed(_) => 1,
            AlphaSchedule::TwoPhase { .. } => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            AlphaSchedule::Fixed(a) => check_alpha(a),
            AlphaSchedule::TwoPhase { first, second } => check_alpha(first).and(check_alpha(second)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub schedule: AlphaSchedule,
    pub max_iters: usize,
    /// Phase ends when the gradient norm drops below this.
    pub grad_tol: f64,
    /// Pixels; a step moving no control point farther counts as stable.
    pub step_tol: f64,
    /// Consecutive stable steps that end a phase.
    pub stabilization_window: usize,
    /// Stored curvature pairs.
    pub memory: usize,
    /// Largest control-point move, in pixels, a line search may try.
    pub max_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            schedule: AlphaSchedule::default(),
            max_iters: 200,
            grad_tol: 1e-4,
            step_tol: 1e-3,
            stabilization_window: 5,
            memory: 10,
            max_step: 8.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.grad_tol) || !positive(self.step_tol) || !positive(self.max_step) {
            return Err(Error::invalid("tolerances and max_step must be positive"));
        }
        if self.stabilization_window == 0 || self.memory == 0 {
            return Err(Error::invalid("stabilization window and memory must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Converged,
    MaxIters,
    Degenerate,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }
}

/// Why a trace record was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    /// Initial evaluation.
    Start,
    /// An accepted line-search step.
    Step,
    /// Switched to the next α; memory cleared.
    PhaseSwitch,
    /// Control points or schedule edited externally; memory cleared.
    Reset,
    Converged,
    MaxIters,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub alpha: f64,
    pub e_grad: f64,
    pub e_reg: f64,
    pub e_total: f64,
    pub grad_norm: f64,
    /// Largest control-point move of this record's step, in pixels.
    pub max_displacement: f64,
    pub event: StepEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

struct Trial {
    step: f64,
    x: Vec<f64>,
    eval: EnergyEval,
    slope: f64,
}

enum SearchFailure {
    /// No trial point had a finite, non-degenerate energy.
    Degenerate,
    /// Finite trials, but none decreased the energy enough.
    NoDecrease,
}

pub struct SnakeOptimizer {
    model: Arc<EnergyModel>,
    polygon: ControlPolygon,
    config: OptimizerConfig,
    phase: usize,
    alpha: f64,
    current: EnergyEval,
    memory: VecDeque<Pair>,
    stable: usize,
    iter: usize,
    budget_start: usize,
    status: Status,
    trace: Vec<IterationRecord>,
}

impl SnakeOptimizer {
    /// Orients `polygon` counterclockwise and evaluates it. A degenerate start
    /// is an error.
    pub fn new(model: Arc<EnergyModel>, polygon: &ControlPolygon, config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let polygon = model.normalize_orientation(polygon)?;
        let alpha = config.schedule.phase_alpha(0);
        let current = model.evaluate(polygon.vertices(), alpha)?;
        let mut opt = Self {
            model,
            polygon,
            config,
            phase: 0,
            alpha,
            current,
            memory: VecDeque::new(),
            stable: 0,
            iter: 0,
            budget_start: 0,
            status: Status::Running,
            trace: Vec::new(),
        };
        opt.record(StepEvent::Start, 0.0);
        Ok(opt)
    }

    pub fn polygon(&self) -> &ControlPolygon {
        &self.polygon
    }

    pub fn model(&self) -> &Arc<EnergyModel> {
        &self.model
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn phase(&self) -> usize {
        self.phase
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    pub fn current(&self) -> &EnergyEval {
        &self.current
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.trace
    }

    pub fn trace(&self) -> OptimizationTrace {
        OptimizationTrace { records: self.trace.clone(), status: self.status }
    }

    /// One accepted step, one phase switch, or a terminal transition. No-op
    /// once the status is terminal.
    pub fn step(&mut self) -> Status {
        if self.status.is_terminal() {
            return self.status;
        }
        if self.iter - self.budget_start >= self.config.max_iters {
            self.finish(Status::MaxIters);
            return self.status;
        }
        if self.current.grad_norm() < self.config.grad_tol {
            self.end_phase();
            return self.status;
        }
        let x = self.flat();
        let result = match self.line_search(&x, true) {
            Err(_) if !self.memory.is_empty() => {
                self.memory.clear();
                self.line_search(&x, false)
            }
            r => r,
        };
        match result {
            Ok(trial) => self.accept(&x, trial),
            Err(SearchFailure::NoDecrease) => self.end_phase(),
            // Blocked by degenerate neighbours: the next α may still move.
            Err(SearchFailure::Degenerate) if self.phase + 1 < self.config.schedule.phases() => self.end_phase(),
            Err(SearchFailure::Degenerate) => self.finish(Status::Degenerate),
        }
        if self.status == Status::Running && self.iter - self.budget_start >= self.config.max_iters {
            self.finish(Status::MaxIters);
        }
        self.status
    }

    /// Moves control point `index`, clears the quasi-Newton memory and resumes.
    /// The edit is rejected if it makes the region degenerate.
    pub fn move_point(&mut self, index: usize, to: Point) -> Result<()> {
        if index >= self.polygon.len() {
            return Err(Error::invalid("control point index out of range"));
        }
        let mut vertices = self.polygon.vertices().to_vec();
        vertices[index] = to;
        let polygon = ControlPolygon::new(self.polygon.scheme(), vertices)?;
        let eval = self.model.evaluate(polygon.vertices(), self.alpha)?;
        self.polygon = polygon;
        self.current = eval;
        self.restart();
        Ok(())
    }

    /// Replaces the α schedule and restarts from its first phase.
    pub fn set_schedule(&mut self, schedule: AlphaSchedule) -> Result<()> {
        schedule.validate()?;
        let alpha = schedule.phase_alpha(0);
        let eval = self.model.evaluate(self.polygon.vertices(), alpha)?;
        self.config.schedule = schedule;
        self.phase = 0;
        self.alpha = alpha;
        self.current = eval;
        self.restart();
        Ok(())
    }

    fn restart(&mut self) {
        self.memory.clear();
        self.stable = 0;
        self.budget_start = self.iter;
        self.status = Status::Running;
        self.record(StepEvent::Reset, 0.0);
    }

    fn record(&mut self, event: StepEvent, max_displacement: f64) {
        self.trace.push(IterationRecord {
            iteration: self.iter,
            alpha: self.alpha,
            e_grad: self.current.e_grad,
            e_reg: self.current.e_reg,
            e_total: self.current.value,
            grad_norm: self.current.grad_norm(),
            max_displacement,
            event,
        });
    }

    fn finish(&mut self, status: Status) {
        self.status = status;
        let event = match status {
            Status::Converged => StepEvent::Converged,
            Status::MaxIters => StepEvent::MaxIters,
            Status::Degenerate => StepEvent::Degenerate,
            Status::Running => return,
        };
        self.record(event, 0.0);
    }

    fn end_phase(&mut self) {
        if self.phase + 1 < self.config.schedule.phases() {
            self.phase += 1;
            self.alpha = self.config.schedule.phase_alpha(self.phase);
            // Same polygon as the accepted iterate, so this cannot be degenerate.
            match self.model.evaluate(self.polygon.vertices(), self.alpha) {
                Ok(eval) => self.current = eval,
                Err(_) => return self.finish(Status::Degenerate),
            }
            self.memory.clear();
            self.stable = 0;
            self.record(StepEvent::PhaseSwitch, 0.0);
        } else {
            self.finish(Status::Converged);
        }
    }

    fn accept(&mut self, x: &[f64], trial: Trial) {
        let s: Vec<f64> = trial.x.iter().zip(x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial.eval.grad.iter().zip(&self.current.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
            if self.memory.len() == self.config.memory {
                self.memory.pop_front();
            }
            self.memory.push_back(Pair { s: s.clone(), y, rho: 1.0 / sy });
        }
        let disp = s
            .chunks_exact(2)
            .map(|d| libm::sqrt(d[0] * d[0] + d[1] * d[1]))
            .fold(0.0, f64::max);
        let vertices = to_points(&trial.x);
        // Vertex count and scheme are unchanged and the trial was finite.
        self.polygon = ControlPolygon::new(self.polygon.scheme(), vertices).expect("valid trial polygon");
        self.current = trial.eval;
        self.iter += 1;
        self.record(StepEvent::Step, disp);
        self.stable = if disp < self.config.step_tol { self.stable + 1 } else { 0 };
        if self.stable >= self.config.stabilization_window || self.current.grad_norm() < self.config.grad_tol {
            self.end_phase();
        }
    }

    fn flat(&self) -> Vec<f64> {
        self.polygon.vertices().iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// `−H·g` by the two-loop recursion, or `−g` without memory.
    fn direction(&self) -> Vec<f64> {
        let g = &self.current.grad;
        let mut q = g.clone();
        let mut a = Vec::with_capacity(self.memory.len());
        for p in self.memory.iter().rev() {
            let ai = p.rho * dot(&p.s, &q);
            axpy(-ai, &p.y, &mut q);
            a.push(ai);
        }
        if let Some(last) = self.memory.back() {
            let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for (p, ai) in self.memory.iter().zip(a.iter().rev()) {
            let b = p.rho * dot(&p.y, &q);
            axpy(ai - b, &p.s, &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    fn trial(&self, x: &[f64], d: &[f64], step: f64) -> Option<Trial> {
        let xt: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + step * b).collect();
        if xt.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let eval = self.model.evaluate(&to_points(&xt), self.alpha).ok()?;
        if !eval.value.is_finite() || eval.grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let slope = dot(&eval.grad, d);
        Some(Trial { step, x: xt, eval, slope })
    }

    /// Strong-Wolfe search along the quasi-Newton direction (or steepest
    /// descent). Falls back to the best sufficient-decrease point.
    fn line_search(&self, x: &[f64], use_memory: bool) -> core::result::Result<Trial, SearchFailure> {
        let mut d = if use_memory && !self.memory.is_empty() {
            self.direction()
        } else {
            self.current.grad.iter().map(|g| -g).collect()
        };
        let mut slope0 = dot(&self.current.grad, &d);
        if !(slope0 < 0.0) {
            d = self.current.grad.iter().map(|g| -g).collect();
            slope0 = dot(&self.current.grad, &d);
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(slope0 < 0.0) || dmax == 0.0 || !dmax.is_finite() {
            return Err(SearchFailure::NoDecrease);
        }
        let f0 = self.current.value;
        let step_max = self.config.max_step / dmax;
        // Without curvature information, start by moving one pixel.
        let mut step = if self.memory.is_empty() || !use_memory { 1.0 / dmax } else { 1.0 };
        step = step.min(step_max);
        let armijo = |t: &Trial| t.eval.value <= f0 + C1 * t.step * slope0 && t.eval.value < f0;
        let curvature = |t: &Trial| t.slope.abs() <= -C2 * slope0;

        let mut any_finite = false;
        let mut prev: Option<Trial> = None;
        for _ in 0..MAX_BRACKET {
            let t = self.trial(x, &d, step);
            any_finite |= t.is_some();
            let t = match t {
                Some(t) if armijo(&t) && prev.as_ref().is_none_or(|p| t.eval.value < p.eval.value) => t,
                other => return self.zoom(x, &d, f0, slope0, prev, step, other, any_finite),
            };
            if curvature(&t) {
                return Ok(t);
            }
            if t.slope >= 0.0 {
                let hi = prev.as_ref().map_or(0.0, |p| p.step);
                return self.zoom(x, &d, f0, slope0, Some(t), hi, prev, any_finite);
            }
            if step >= step_max {
                return Ok(t);
            }
            step = (2.0 * step).min(step_max);
            prev = Some(t);
        }
        prev.ok_or(if any_finite { SearchFailure::NoDecrease } else { SearchFailure::Degenerate })
    }

    /// Shrinks the bracket between `lo` (best sufficient-decrease point so
    /// far, `None` for the origin) and the step `hi`.
    #[allow(clippy::too_many_arguments)]
    fn zoom(
        &self,
        x: &[f64],
        d: &[f64],
        f0: f64,
        slope0: f64,
        mut lo: Option<Trial>,
        mut hi: f64,
        mut hi_trial: Option<Trial>,
        mut any_finite: bool,
    ) -> core::result::Result<Trial, SearchFailure> {
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..MAX_ZOOM {
            let (a_lo, f_lo, g_lo) = match &lo {
                Some(t) => (t.step, t.eval.value, t.slope),
                None => (0.0, f0, slope0),
            };
            if (hi - a_lo).abs() * dmax < 1e-9 {
                break;
            }
            let step = match &hi_trial {
                Some(h) if h.step == hi => cubic_step(a_lo, f_lo, g_lo, hi, h.eval.value, h.slope),
                None if hi == 0.0 => cubic_step(a_lo, f_lo, g_lo, 0.0, f0, slope0),
                _ => 0.5 * (a_lo + hi),
            };
            let t = self.trial(x, d, step);
            any_finite |= t.is_some();
            match t {
                Some(t) if t.eval.value <= f0 + C1 * t.step * slope0 && t.eval.value < f_lo => {
                    if t.slope.abs() <= -C2 * slope0 {
                        return Ok(t);
                    }
                    if t.slope * (hi - a_lo) >= 0.0 {
                        hi = a_lo;
                        hi_trial = lo.take();
                    }
                    lo = Some(t);
                }
                other => {
                    hi = step;
                    hi_trial = other;
                }
            }
        }
        lo.ok_or(if any_finite { SearchFailure::NoDecrease } else { SearchFailure::Degenerate })
    }
}

/// Minimizer of the cubic through both ends, kept inside the middle 80% of
/// the bracket.
fn cubic_step(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (hi - lo);
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    let mid = 0.5 * (a + b);
    if !(disc >= 0.0) {
        return mid;
    }
    let d2 = libm::copysign(libm::sqrt(disc), b - a);
    let t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    if t.is_finite() {
        t.clamp(lo + margin, hi - margin)
    } else {
        mid
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn to_points(x: &[f64]) -> Vec<Point> {
    x.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect()
}

/// Runs a fresh optimizer until its status is terminal.
pub fn minimize(
    model: Arc<EnergyModel>,
    polygon: &ControlPolygon,
    config: OptimizerConfig,
) -> Result<(ControlPolygon, OptimizationTrace)> {
    let mut opt = SnakeOptimizer::new(model, polygon, config)?;
    while opt.step() == Status::Running {}
    Ok((opt.polygon().clone(), opt.trace()))
}
