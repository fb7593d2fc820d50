//! Subdivision-curve snakes.
//!
//! A snake is a closed curve generated by a binary subdivision scheme (the
//! four-point interpolatory scheme or the cubic B-spline scheme) from a small
//! control polygon. The curve is evaluated exactly at dyadic parameters from a
//! precomputed table of the scheme's basic limit function, and the control
//! points are fitted to an object boundary by minimizing a blend of a
//! directional gradient energy and a bounding-box contrast region energy.
//!
//! Coordinates follow matrix indexing: a point is `(x, y) = (row, column)` and
//! pixel `(r, c)` of an image sits at the lattice point `(r, c)`.
//!
//! This crate is `no_std` (it needs `alloc`). Image decoding, file formats and
//! the command line live in the companion `subsnake` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod energy;
mod error;
pub mod geometry;
pub mod imaging;
pub mod mask;
pub mod optimize;
pub mod raster;
pub mod subdiv;
pub mod synth;

pub use energy::{EnergyEval, EnergyModel, EnergyParams, Polarity, RegionBox};
pub use error::{Error, Result};
pub use geometry::Point;
pub use imaging::{DerivativeFields, Grid, GrayImage, RowPrefixTable};
pub use mask::{jaccard_distance, Mask};
pub use optimize::{
    minimize, AlphaSchedule, IterationRecord, OptimizationTrace, OptimizerConfig, SnakeOptimizer,
    Status, StepEvent,
};
pub use raster::{rasterize_snake, BoundaryRaster, EdgeClass, RegionIntegrals};
pub use subdiv::{
    evaluate_curve, interpolation_operator, refine_once, BasicFunctionTable, ControlPolygon,
    CurveSample, Scheme,
};
