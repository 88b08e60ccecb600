//! Scalar and Hermitian-matrix fields on a periodic grid.

use crate::grid::{check_same_grid, PeriodicGrid};
use crate::linalg::CMat;
use crate::util::{self, par_sum_indexed};
use crate::{Error, Result, HERMITIAN_TOL};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

/// Chunk size for parallel pointwise maps; fixed for determinism.
const MAP_CHUNK: usize = 2048;

/// One IEEE-754 binary64 value per grid point, row-major in axis order.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<PeriodicGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<PeriodicGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.total_points()] }
    }

    pub fn constant(grid: &Arc<PeriodicGrid>, v: f64) -> Self {
        Self { grid: grid.clone(), values: vec![v; grid.total_points()] }
    }

    pub fn from_values(grid: &Arc<PeriodicGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::InvalidGrid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.total_points()
            )));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Evaluate `f` at the real coordinates of every grid point.
    pub fn from_fn<F>(grid: &Arc<PeriodicGrid>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let mut values = vec![0.0; grid.total_points()];
        values
            .par_chunks_mut(MAP_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * MAP_CHUNK;
                for (k, v) in chunk.iter_mut().enumerate() {
                    *v = f(&grid.position_of(base + k));
                }
            });
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let mut out = self.clone();
        out.values.par_chunks_mut(MAP_CHUNK).for_each(|chunk| {
            for v in chunk {
                *v = f(*v);
            }
        });
        out
    }

    pub fn zip_map<F>(&self, other: &ScalarField, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        check_same_grid(&self.grid, &other.grid)?;
        let mut out = self.clone();
        out.values
            .par_chunks_mut(MAP_CHUNK)
            .zip(other.values.par_chunks(MAP_CHUNK))
            .for_each(|(a, b)| {
                for (x, &y) in a.iter_mut().zip(b) {
                    *x = f(*x, y);
                }
            });
        Ok(out)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        self.map(|v| v + s)
    }

    /// In-place `self += s * other`, the RK4 update kernel.
    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        self.values
            .par_chunks_mut(MAP_CHUNK)
            .zip(other.values.par_chunks(MAP_CHUNK))
            .for_each(|(a, b)| {
                for (x, &y) in a.iter_mut().zip(b) {
                    *x += s * y;
                }
            });
    }

    pub fn sup(&self) -> f64 {
        util::min_max(&self.values).1
    }

    pub fn inf(&self) -> f64 {
        util::min_max(&self.values).0
    }

    /// `sup − inf` over grid points.
    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = util::min_max(&self.values);
        hi - lo
    }

    pub fn max_abs(&self) -> f64 {
        let (lo, hi) = util::min_max(&self.values);
        lo.abs().max(hi.abs())
    }

    pub fn check_finite(&self) -> Result<()> {
        match util::first_non_finite(&self.values) {
            Some(point) => Err(Error::NonFinite { point }),
            None => Ok(()),
        }
    }

    /// Flat-measure integral `∏h · Σ f(p)`, spectrally accurate for smooth
    /// periodic integrands.
    pub fn integrate_flat(&self) -> f64 {
        self.grid.cell_volume() * util::par_sum(&self.values)
    }
}

/// `∫ f · vol` over the torus with the flat measure, `vol` a volume density
/// such as `ω^n / dV_flat`.
pub fn integrate(f: &ScalarField, vol: &ScalarField) -> Result<f64> {
    check_same_grid(f.grid(), vol.grid())?;
    let fv = f.values();
    let vv = vol.values();
    Ok(f.grid().cell_volume() * par_sum_indexed(fv.len(), |i| fv[i] * vv[i]))
}

/// Pointwise `n×n` Hermitian matrices over the grid, stored as `n²`
/// complex64 entries per point (re/im interleaved), row-major within the
/// matrix. Hermitian by construction: every write path symmetrizes.
#[derive(Debug, Clone)]
pub struct HermitianField {
    grid: Arc<PeriodicGrid>,
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianField {
    pub fn zeros(grid: &Arc<PeriodicGrid>) -> Self {
        let dim = grid.dim();
        Self { grid: grid.clone(), dim, data: vec![Complex64::default(); grid.total_points() * dim * dim] }
    }

    /// Constant matrix field. Fails if the matrix is not Hermitian to
    /// within [`HERMITIAN_TOL`].
    pub fn constant(grid: &Arc<PeriodicGrid>, m: &CMat) -> Result<Self> {
        if m.dim() != grid.dim() {
            return Err(Error::InvalidGrid("matrix dimension does not match grid".into()));
        }
        if m.hermitian_deviation() > HERMITIAN_TOL {
            return Err(Error::Degenerate(format!(
                "matrix deviates from Hermitian by {:.3e}",
                m.hermitian_deviation()
            )));
        }
        let h = m.hermitian_part();
        let total = grid.total_points();
        let nn = grid.dim() * grid.dim();
        let mut data = vec![Complex64::default(); total * nn];
        data.par_chunks_mut(nn).for_each(|chunk| {
            chunk.copy_from_slice(h.entries());
        });
        Ok(Self { grid: grid.clone(), dim: grid.dim(), data })
    }

    /// Evaluate a matrix-valued function of position; each value is
    /// symmetrized on ingest and rejected if it deviates from Hermitian by
    /// more than [`HERMITIAN_TOL`].
    pub fn from_fn<F>(grid: &Arc<PeriodicGrid>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> CMat + Sync,
    {
        let dim = grid.dim();
        let nn = dim * dim;
        let total = grid.total_points();
        let mut data = vec![Complex64::default(); total * nn];
        let bad = data
            .par_chunks_mut(nn)
            .enumerate()
            .map(|(p, chunk)| {
                let m = f(&grid.position_of(p));
                if m.hermitian_deviation() > HERMITIAN_TOL {
                    return Some(p);
                }
                chunk.copy_from_slice(m.hermitian_part().entries());
                None
            })
            .reduce(|| None, |a, b| a.or(b));
        if let Some(p) = bad {
            return Err(Error::Degenerate(format!("non-Hermitian matrix at grid point {p}")));
        }
        Ok(Self { grid: grid.clone(), dim, data })
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, point: usize) -> CMat {
        let nn = self.dim * self.dim;
        CMat::from_rows(self.dim, &self.data[point * nn..(point + 1) * nn])
    }

    #[inline]
    pub fn set_at(&mut self, point: usize, m: &CMat) {
        let nn = self.dim * self.dim;
        self.data[point * nn..(point + 1) * nn].copy_from_slice(m.entries());
    }

    pub fn add(&self, other: &HermitianField) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        let mut out = self.clone();
        out.data
            .par_chunks_mut(MAP_CHUNK)
            .zip(other.data.par_chunks(MAP_CHUNK))
            .for_each(|(a, b)| {
                for (x, &y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            });
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.par_chunks_mut(MAP_CHUNK).for_each(|chunk| {
            for v in chunk {
                *v *= s;
            }
        });
        out
    }

    /// Worst Hermitian deviation over all points (should be 0 by
    /// construction; exposed for validation).
    pub fn max_hermitian_deviation(&self) -> f64 {
        (0..self.grid.total_points())
            .into_par_iter()
            .map(|p| self.at(p).hermitian_deviation())
            .reduce(|| 0.0, f64::max)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (k, z) in self.data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { point: k / (self.dim * self.dim) });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use std::f64::consts::TAU;

    fn grid() -> Arc<PeriodicGrid> {
        PeriodicGrid::new(2, &[8, 1, 8, 1], &[1.0, 1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn integrate_constant_is_total_volume() {
        let g = grid();
        let one = ScalarField::constant(&g, 1.0);
        let v = integrate(&one, &one).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_mean_zero_mode_vanishes() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x| (TAU * x[0]).sin());
        let one = ScalarField::constant(&g, 1.0);
        assert!(integrate(&f, &one).unwrap().abs() <= 1e-14);
    }

    #[test]
    fn oscillation_of_resolved_sine_is_two() {
        // N divisible by 4 puts ±1 on the grid.
        let g = grid();
        let f = ScalarField::from_fn(&g, |x| (TAU * x[0]).sin());
        assert!((f.oscillation() - 2.0).abs() < 1e-12);
        assert_eq!(f.add_scalar(5.0).oscillation(), f.oscillation());
    }

    #[test]
    fn hermitian_ingest_rejects_asymmetric() {
        let g = grid();
        let mut m = CMat::identity(2);
        m.set(0, 1, Complex64::new(0.3, 0.0));
        // (1,0) left at zero: not Hermitian.
        assert!(HermitianField::constant(&g, &m).is_err());
    }
}
