//! Uniform periodic grids on the torus `T^{2n} ≅ ℂⁿ`.
//!
//! Real coordinates are ordered `x⁰..x^{2n-1}` with `z^j = x^{2j} + i x^{2j+1}`.
//! Values are stored row-major in axis order, last axis contiguous. An axis
//! with a single sample means the fields are constant along it, which makes
//! effectively lower-dimensional runs cheap without special cases.

use crate::{Error, Result, MAX_DIM};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    points: Vec<usize>,
    periods: Vec<f64>,
    strides: Vec<usize>,
    total: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize, points: &[usize], periods: &[f64]) -> Result<Arc<Self>> {
        if n < 2 || n > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "complex dimension {n} outside supported range 2..={MAX_DIM}"
            )));
        }
        if points.len() != 2 * n || periods.len() != 2 * n {
            return Err(Error::InvalidGrid(format!(
                "expected {} per-axis entries, got {} points / {} periods",
                2 * n,
                points.len(),
                periods.len()
            )));
        }
        if points.iter().any(|&p| p == 0) {
            return Err(Error::InvalidGrid("every axis needs at least one sample".into()));
        }
        if periods.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidGrid("periods must be positive and finite".into()));
        }
        let total: usize = points.iter().product();
        let mut strides = vec![0usize; 2 * n];
        let mut s = 1usize;
        for a in (0..2 * n).rev() {
            strides[a] = s;
            s *= points[a];
        }
        Ok(Arc::new(Self {
            n,
            points: points.to_vec(),
            periods: periods.to_vec(),
            strides,
            total,
        }))
    }

    /// Complex dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of real axes, `2n`.
    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn total_points(&self) -> usize {
        self.total
    }

    /// Grid spacing `h_a = L_a / N_a`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.points[axis] as f64
    }

    /// Smallest spacing over axes that actually carry more than one sample.
    pub fn min_spacing(&self) -> f64 {
        (0..self.axes())
            .filter(|&a| self.points[a] > 1)
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Cell volume `∏ h_a` of the flat measure.
    pub fn cell_volume(&self) -> f64 {
        (0..self.axes()).map(|a| self.spacing(a)).product()
    }

    /// Per-axis sample indices of the linear point index.
    pub fn coords_of(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0usize; self.axes()];
        for a in 0..self.axes() {
            c[a] = idx / self.strides[a];
            idx %= self.strides[a];
        }
        c
    }

    /// Real coordinates of the linear point index.
    pub fn position_of(&self, idx: usize) -> Vec<f64> {
        self.coords_of(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| i as f64 * self.spacing(a))
            .collect()
    }

    /// Linear index from per-axis sample indices (wrapped periodically).
    pub fn index_of(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .enumerate()
            .map(|(a, &c)| (c % self.points[a]) * self.strides[a])
            .sum()
    }

    pub fn same_as(&self, other: &PeriodicGrid) -> bool {
        self == other
    }
}

/// Error out unless two fields share a grid.
pub fn check_same_grid(a: &PeriodicGrid, b: &PeriodicGrid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}
