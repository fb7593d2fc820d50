//! Binary pixel masks and the Jaccard distance between them.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: vec![false; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                bits.push(f(r, c));
            }
        }
        Self { rows, cols, bits }
    }

    pub fn from_vec(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::invalid("mask data length does not match dimensions"));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.bits[r * self.cols + c] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// `1 − |Ω ∩ Γ| / |Ω ∪ Γ|`.
pub fn jaccard_distance(omega: &Mask, gamma: &Mask) -> Result<f64> {
    if omega.rows != gamma.rows || omega.cols != gamma.cols {
        return Err(Error::invalid("masks differ in size"));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in omega.bits.iter().zip(&gamma.bits) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    if union == 0 {
        return Err(Error::invalid("both masks are empty"));
    }
    Ok(1.0 - inter as f64 / union as f64)
}
