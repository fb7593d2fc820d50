//! Building an optimizer from an image, an initial polygon and options. The
//! CLI and the HTTP sessions both go through [`Setup::start`], so equal inputs
//! give equal traces.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use subsnake_core::{
    BasicFunctionTable, ControlPolygon, EnergyModel, EnergyParams, GrayImage, OptimizerConfig, Polarity, RegionBox,
    Scheme, SnakeOptimizer,
};

use crate::error::{HarnessError, Result};

/// Basic-function tables keyed by scheme and depth. Tables are immutable, so
/// sessions share them.
#[derive(Debug, Default)]
pub struct TableCache {
    tables: Mutex<HashMap<(u64, u32), Arc<BasicFunctionTable>>>,
}

impl TableCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, scheme: Scheme, depth: u32) -> Result<Arc<BasicFunctionTable>> {
        // The B-spline has no tension; NaN bits cannot collide with a valid ω.
        let key = match scheme {
            Scheme::FourPoint { omega } => omega.to_bits(),
            Scheme::CubicBSpline => f64::NAN.to_bits(),
        };
        let mut tables = self.tables.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = tables.get(&(key, depth)) {
            return Ok(t.clone());
        }
        let t = Arc::new(BasicFunctionTable::new(scheme, depth)?);
        tables.insert((key, depth), t.clone());
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.tables.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything but the image and the initial polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub depth: u32,
    /// `None` is the whole image.
    pub region: Option<RegionBox>,
    pub polarity: Polarity,
    pub filter_halfwidth: Option<usize>,
    pub config: OptimizerConfig,
}

impl Default for Setup {
    fn default() -> Self {
        Self { depth: 4, region: None, polarity: Polarity::DarkObject, filter_halfwidth: None, config: OptimizerConfig::default() }
    }
}

impl Setup {
    pub fn region_for(&self, image: &GrayImage) -> Result<RegionBox> {
        let region = self.region.unwrap_or_else(|| RegionBox::full(image.rows(), image.cols()));
        if region.row_max >= image.rows() || region.col_max >= image.cols() {
            return Err(HarnessError::invalid("region box exceeds the image"));
        }
        Ok(region)
    }

    pub fn model(&self, image: &GrayImage, scheme: Scheme, cache: &TableCache) -> Result<Arc<EnergyModel>> {
        let mut params = EnergyParams::new(self.region_for(image)?);
        params.depth = self.depth;
        params.polarity = self.polarity;
        params.filter_halfwidth = self.filter_halfwidth;
        Ok(Arc::new(EnergyModel::new(image, cache.get(scheme, self.depth)?, params)?))
    }

    /// Optimizer at the start of a run. The initial curve must lie inside the
    /// region box.
    pub fn start(&self, image: &GrayImage, init: &ControlPolygon, cache: &TableCache) -> Result<SnakeOptimizer> {
        self.config.validate()?;
        let model = self.model(image, init.scheme(), cache)?;
        let region = model.params().region;
        let inside = model.sample(init.vertices()).points.iter().all(|p| {
            p.x >= region.row_min as f64
                && p.x <= region.row_max as f64
                && p.y >= region.col_min as f64
                && p.y <= region.col_max as f64
        });
        if !inside {
            return Err(HarnessError::invalid("initial curve leaves the region box"));
        }
        Ok(SnakeOptimizer::new(model, init, self.config)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use subsnake_core::Point;

    #[test]
    fn cache_reuses_tables() {
        let cache = TableCache::new();
        let a = cache.get(Scheme::four_point(), 4).unwrap();
        let b = cache.get(Scheme::four_point(), 4).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get(Scheme::CubicBSpline, 4).unwrap();
        cache.get(Scheme::four_point_with_tension(0.1).unwrap(), 4).unwrap();
        cache.get(Scheme::four_point(), 5).unwrap();
        assert_eq!(cache.len(), 4);
        assert!(cache.get(Scheme::CubicBSpline, 0).is_err());
    }

    #[test]
    fn initial_curve_must_fit_the_box() {
        let img = GrayImage::from_fn(64, 64, |r, _| r as f64).unwrap();
        let p = ControlPolygon::circle(Scheme::four_point(), Point::new(32.0, 32.0), 10.0, 6).unwrap();
        let cache = TableCache::new();
        let tight = Setup { region: Some(RegionBox::new(25, 40, 25, 40).unwrap()), ..Setup::default() };
        assert!(tight.start(&img, &p, &cache).is_err());
        let outside = Setup { region: Some(RegionBox::new(0, 64, 0, 63).unwrap()), ..Setup::default() };
        assert!(outside.start(&img, &p, &cache).is_err());
        assert!(Setup::default().start(&img, &p, &cache).is_ok());
    }
}
