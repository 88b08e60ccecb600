//! Pointwise multilinear algebra of Hermitian forms.
//!
//! Everything here is relative to a positive-definite metric form `g`
//! (the ambient `ω`): eigenvalues of `X` against `g`, wedge-product ratios
//! `(A₁∧…∧A_n)/ω^n` via mixed discriminants in a g-orthonormal frame, the
//! cone condition in its per-direction reduced form, and the Chern
//! torsion/curvature of a metric field (validation utilities; no runtime
//! formula of the flow consumes them).

use crate::field::{HermitianField, ScalarField};
use crate::grid::{check_same_grid, PeriodicGrid};
use crate::linalg::{eigen2, hermitian_eigen, CMat};
use crate::spectral::{DerivOrder, SpectralOps};
use crate::symfunc::{binomial, elem_sym_excluding};
use crate::util;
use crate::{Error, Result, MAX_DIM, POSITIVITY_FLOOR};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

/// Prefactored metric: per-point Cholesky factors of `g`, its volume
/// density `ω^n/dV_flat = n!·det g`, and a global bound on `λ_max(g⁻¹)`.
/// Constant metrics are detected and factored once.
pub struct MetricFactors {
    grid: Arc<PeriodicGrid>,
    dim: usize,
    chol: Factors,
    vol_density: ScalarField,
    ginv_max_eig: f64,
    identity: bool,
}

enum Factors {
    Constant(CMat),
    Field(Vec<CMat>),
}

impl MetricFactors {
    pub fn new(g: &HermitianField) -> Result<Self> {
        let grid = g.grid().clone();
        let n = g.dim();
        let total = grid.total_points();
        let nn = n * n;
        let constant = (1..total).all(|p| g.data()[p * nn..(p + 1) * nn] == g.data()[..nn]);

        let factor_at = |p: usize| -> Result<CMat> {
            let m = g.at(p);
            m.cholesky().map_err(|_| {
                let (vals, _) = hermitian_eigen(&m, false);
                Error::NotPositiveDefinite { point: p, least: vals[0] }
            })
        };

        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        let (chol, vol_density, ginv_max) = if constant {
            let l = factor_at(0)?;
            let m = g.at(0);
            let det = m.det().re;
            let inv = m.hermitian_inverse()?;
            let (ivals, _) = hermitian_eigen(&inv, false);
            (
                Factors::Constant(l),
                ScalarField::constant(&grid, factorial * det),
                ivals[n - 1],
            )
        } else {
            let factors: Vec<Result<CMat>> =
                (0..total).into_par_iter().map(factor_at).collect();
            let mut chols = Vec::with_capacity(total);
            for f in factors {
                chols.push(f?);
            }
            let mut vol = vec![0.0; total];
            let ginv_max = vol
                .par_iter_mut()
                .enumerate()
                .map(|(p, v)| {
                    let m = g.at(p);
                    *v = factorial * m.det().re;
                    let inv = m.hermitian_inverse().expect("factored above");
                    let (ivals, _) = hermitian_eigen(&inv, false);
                    ivals[n - 1]
                })
                .reduce(|| 0.0, f64::max);
            (
                Factors::Field(chols),
                ScalarField::from_values(&grid, vol)?,
                ginv_max,
            )
        };
        let identity = match &chol {
            Factors::Constant(l) => l.sub(&CMat::identity(n)).max_abs() == 0.0,
            Factors::Field(_) => false,
        };
        Ok(Self { grid, dim: n, chol, vol_density, ginv_max_eig: ginv_max, identity })
    }

    /// Whether the metric is exactly the identity everywhere (fast paths
    /// skip the congruence reduction).
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn chol_at(&self, p: usize) -> &CMat {
        match &self.chol {
            Factors::Constant(l) => l,
            Factors::Field(v) => &v[p],
        }
    }

    /// `L⁻¹ X L⁻ᴴ` at point `p`.
    #[inline]
    pub fn reduce(&self, p: usize, x: &CMat) -> CMat {
        self.chol_at(p).congruence_reduce(x)
    }

    /// Volume density `ω^n/dV_flat`.
    pub fn vol_density(&self) -> &ScalarField {
        &self.vol_density
    }

    /// Global bound on the largest eigenvalue of `g⁻¹`.
    pub fn ginv_max_eig(&self) -> f64 {
        self.ginv_max_eig
    }
}

/// Per-point eigenvalues of a Hermitian field relative to a metric, sorted
/// ascending (`n` values per grid point).
pub struct EigenSpectrum {
    grid: Arc<PeriodicGrid>,
    dim: usize,
    values: Vec<f64>,
}

impl EigenSpectrum {
    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest eigenvalue over the grid and the point attaining it.
    pub fn global_min(&self) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for p in 0..self.grid.total_points() {
            let v = self.values[p * self.dim];
            if v < best.1 {
                best = (p, v);
            }
        }
        best
    }

    pub fn global_max(&self) -> f64 {
        util::min_max(&self.values).1
    }
}

/// Solutions of `det(X − λ g) = 0` per point, ascending, by congruence
/// reduction and a symmetric eigensolve.
pub fn rel_eigenvalues(x: &HermitianField, metric: &MetricFactors) -> Result<EigenSpectrum> {
    check_same_grid(x.grid(), metric.grid())?;
    let n = x.dim();
    let total = x.grid().total_points();
    let mut values = vec![0.0f64; total * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(p, out)| {
            let reduced = metric.reduce(p, &x.at(p));
            if n == 2 {
                out.copy_from_slice(&eigen2(&reduced));
            } else {
                let (vals, _) = hermitian_eigen(&reduced, false);
                out.copy_from_slice(&vals[..n]);
            }
        });
    Ok(EigenSpectrum { grid: x.grid().clone(), dim: n, values })
}

/// Trace of `X` relative to the metric, `Σᵢ λᵢ` as a scalar field.
pub fn rel_trace(x: &HermitianField, metric: &MetricFactors) -> Result<ScalarField> {
    check_same_grid(x.grid(), metric.grid())?;
    let total = x.grid().total_points();
    let mut values = vec![0.0f64; total];
    values.par_iter_mut().enumerate().for_each(|(p, v)| {
        *v = metric.reduce(p, &x.at(p)).trace().re;
    });
    ScalarField::from_values(x.grid(), values)
}

/// Permutations of `0..n` in a fixed deterministic order.
fn permutations(n: usize) -> Vec<[usize; MAX_DIM]> {
    let mut out = Vec::new();
    let mut idx = [0usize; MAX_DIM];
    for (i, v) in idx.iter_mut().enumerate() {
        *v = i;
    }
    fn heap(k: usize, a: &mut [usize; MAX_DIM], n: usize, out: &mut Vec<[usize; MAX_DIM]>) {
        if k == 1 {
            out.push(*a);
            return;
        }
        for i in 0..k {
            heap(k - 1, a, n, out);
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut idx, n, &mut out);
    out
}

/// Normalized mixed discriminant `D(A₁,…,A_n)` with `D(I,…,I) = 1`,
/// computed as `(1/n!)·Σ_σ det(M_σ)` where column `j` of `M_σ` comes from
/// `A_{σ(j)}`. Permutation sum is fine at these dimensions.
fn mixed_discriminant(mats: &[&CMat], perms: &[[usize; MAX_DIM]]) -> f64 {
    let n = mats.len();
    if n == 0 {
        return 1.0;
    }
    // All factors identical: plain determinant.
    if mats.iter().all(|m| std::ptr::eq(*m, mats[0])) {
        return mats[0].det().re;
    }
    let mut acc = 0.0;
    for sigma in perms {
        let mut m = CMat::zero(n);
        for j in 0..n {
            let src = mats[sigma[j]];
            for i in 0..n {
                m.set(i, j, src.get(i, j));
            }
        }
        acc += m.det().re;
    }
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    acc / factorial
}

/// Mixed discriminant of explicit matrices (no metric reduction); the
/// pointwise kernel behind [`wedge_ratio`], exposed for validation.
pub fn mixed_discriminant_of(mats: &[CMat]) -> f64 {
    let n = mats.first().map_or(0, |m| m.dim());
    let perms = permutations(n);
    let refs: Vec<&CMat> = mats.iter().collect();
    mixed_discriminant(&refs, &perms)
}

/// Pointwise ratio `(A₁^{m₁} ∧ … ∧ A_k^{m_k}) / ω^n` with multiplicities
/// summing to `n`, evaluated in a per-point g-orthonormal frame.
pub fn wedge_ratio(
    factors: &[(&HermitianField, usize)],
    metric: &MetricFactors,
) -> Result<ScalarField> {
    let n = metric.dim();
    let msum: usize = factors.iter().map(|(_, m)| m).sum();
    if msum != n {
        return Err(Error::MultiplicitySum { got: msum, expected: n });
    }
    for (f, _) in factors {
        check_same_grid(f.grid(), metric.grid())?;
    }
    let perms = permutations(n);
    let total = metric.grid().total_points();
    let mut values = vec![0.0f64; total];
    values.par_iter_mut().enumerate().for_each(|(p, v)| {
        let mut reduced = [CMat::zero(n); MAX_DIM];
        for (fi, (f, _)) in factors.iter().enumerate() {
            reduced[fi] = metric.reduce(p, &f.at(p));
        }
        let mut list: [&CMat; MAX_DIM] = [&reduced[0]; MAX_DIM];
        let mut pos = 0usize;
        for (fi, (_, mult)) in factors.iter().enumerate() {
            for _ in 0..*mult {
                list[pos] = &reduced[fi];
                pos += 1;
            }
        }
        *v = mixed_discriminant(&list[..n], &perms);
    });
    ScalarField::from_values(metric.grid(), values)
}

/// Outcome of the cone-condition check
/// `n χ'^{n-1} > (n-α) ψ χ'^{n-α-1} ∧ ω^α`.
#[derive(Debug, Clone)]
pub struct ConeReport {
    pub satisfied: bool,
    /// `min` over grid points and directions `i` of
    /// `1 − (ψ/C(n,α))·S_α({1/λ_j}_{j≠i})`.
    pub margin: f64,
    pub worst_point: usize,
    /// Whether `χ'` is positive definite everywhere.
    pub positive: bool,
    pub least_eigenvalue: f64,
}

/// Check the cone condition through its per-direction reduction on the
/// relative eigenvalues of `χ'`. The reduction is validated against the
/// direct wedge-form expansion in [`crate::verify`].
pub fn cone_condition(
    chi_prime: &HermitianField,
    metric: &MetricFactors,
    psi: &ScalarField,
    alpha: usize,
) -> Result<ConeReport> {
    let n = metric.dim();
    if alpha < 1 || alpha > n {
        return Err(Error::Scenario(format!("alpha {alpha} outside 1..={n}")));
    }
    check_same_grid(psi.grid(), metric.grid())?;
    let spectrum = rel_eigenvalues(chi_prime, metric)?;
    let (least_pt, least) = spectrum.global_min();
    let positive = least > POSITIVITY_FLOOR;
    let c_na = binomial(n, alpha);
    let total = metric.grid().total_points();

    let mut margin = f64::INFINITY;
    let mut worst = least_pt;
    if positive {
        let psi_v = psi.values();
        // Per point, per direction i: (ψ/C(n,α))·S_α(1/λ without direction i) < 1.
        let per_point: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|p| {
                let lam = spectrum.at(p);
                let mut mu = [0.0f64; MAX_DIM];
                for (m, &l) in mu.iter_mut().zip(lam) {
                    *m = 1.0 / l;
                }
                let mut worst_dir = f64::INFINITY;
                for i in 0..n {
                    let s = elem_sym_excluding(&mu[..n], i, alpha);
                    worst_dir = worst_dir.min(1.0 - psi_v[p] / c_na * s);
                }
                worst_dir
            })
            .collect();
        for (p, &m) in per_point.iter().enumerate() {
            if m < margin {
                margin = m;
                worst = p;
            }
        }
    } else {
        margin = f64::NEG_INFINITY;
    }

    Ok(ConeReport {
        satisfied: positive && margin > 0.0,
        margin,
        worst_point: worst,
        positive,
        least_eigenvalue: least,
    })
}

/// Chern torsion `T^k_{ij}` and curvature `R_{ij̄kl̄}` of a metric field.
pub struct TorsionCurvature {
    grid: Arc<PeriodicGrid>,
    dim: usize,
    torsion: Vec<Complex64>,
    curvature: Vec<Complex64>,
}

impl TorsionCurvature {
    /// `T^k_{ij}` at point `p`.
    pub fn torsion(&self, p: usize, k: usize, i: usize, j: usize) -> Complex64 {
        let n = self.dim;
        self.torsion[((p * n + k) * n + i) * n + j]
    }

    /// `R_{i j̄ k l̄}` at point `p`.
    pub fn curvature(&self, p: usize, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let n = self.dim;
        self.curvature[(((p * n + i) * n + j) * n + k) * n + l]
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_torsion(&self) -> f64 {
        self.torsion.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_curvature(&self) -> f64 {
        self.curvature.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Worst violation of `T^k_{ij} = −T^k_{ji}`.
    pub fn torsion_antisymmetry_defect(&self) -> f64 {
        let n = self.dim;
        let total = self.grid.total_points();
        let mut worst: f64 = 0.0;
        for p in 0..total {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        worst = worst
                            .max((self.torsion(p, k, i, j) + self.torsion(p, k, j, i)).norm());
                    }
                }
            }
        }
        worst
    }

    /// Worst violation of the conjugate symmetry
    /// `conj(R_{ij̄kl̄}) = R_{jīlk̄}`.
    pub fn curvature_symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let total = self.grid.total_points();
        let mut worst: f64 = 0.0;
        for p in 0..total {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let a = self.curvature(p, i, j, k, l).conj();
                            let b = self.curvature(p, j, i, l, k);
                            worst = worst.max((a - b).norm());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Holomorphic and antiholomorphic derivatives of every entry of `g`,
/// via spectral real-axis derivatives:
/// `∂_i = ½(D_{2i} − i D_{2i+1})`, `∂̄_i = ½(D_{2i} + i D_{2i+1})`.
fn complex_derivatives(
    ops: &SpectralOps,
    entry: &[Complex64],
) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    let n = ops.grid().dim();
    let total = ops.grid().total_points();
    let mut hol = Vec::with_capacity(n);
    let mut ahol = Vec::with_capacity(n);
    for i in 0..n {
        let dx = ops.derivative_complex(entry, 2 * i, DerivOrder::First)?;
        let dy = ops.derivative_complex(entry, 2 * i + 1, DerivOrder::First)?;
        let mut h = vec![Complex64::default(); total];
        let mut a = vec![Complex64::default(); total];
        for p in 0..total {
            let iy = Complex64::new(0.0, 1.0) * dy[p];
            h[p] = 0.5 * (dx[p] - iy);
            a[p] = 0.5 * (dx[p] + iy);
        }
        hol.push(h);
        ahol.push(a);
    }
    Ok((hol, ahol))
}

/// `T^k_{ij} = Σ_l g^{kl̄}(∂_i g_{jl̄} − ∂_j g_{il̄})` and
/// `R_{ij̄kl̄} = −∂_i∂̄_j g_{kl̄} + Σ_{p,q} g^{pq̄} ∂_i g_{kq̄} ∂̄_j g_{pl̄}`,
/// all derivatives spectral. Flat (constant) metrics give exact zeros.
pub fn torsion_curvature(g: &HermitianField, ops: &SpectralOps) -> Result<TorsionCurvature> {
    check_same_grid(g.grid(), ops.grid())?;
    let n = g.dim();
    let grid = g.grid().clone();
    let total = grid.total_points();

    // Up-front positivity check so the error carries the worst point.
    MetricFactors::new(g)?;

    // Entry buffers g_{kl̄}.
    let mut entries: Vec<Vec<Complex64>> = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let mut e = vec![Complex64::default(); total];
            for p in 0..total {
                e[p] = g.at(p).get(k, l);
            }
            entries.push(e);
        }
    }

    // d_hol[i][k*n+l] = ∂_i g_{kl̄}; d_ahol likewise.
    let mut d_hol: Vec<Vec<Vec<Complex64>>> = vec![Vec::new(); n];
    let mut d_ahol: Vec<Vec<Vec<Complex64>>> = vec![Vec::new(); n];
    for e in &entries {
        let (h, a) = complex_derivatives(ops, e)?;
        for i in 0..n {
            d_hol[i].push(h[i].clone());
            d_ahol[i].push(a[i].clone());
        }
    }

    // Mixed second derivatives ∂_i ∂̄_j g_{kl̄}: antiholomorphic derivative
    // applied to the holomorphic first derivative.
    let mut d2: Vec<Vec<Complex64>> = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for kl in 0..n * n {
            let (_, a) = complex_derivatives(ops, &d_hol[i][kl])?;
            for aj in a {
                d2.push(aj);
            }
        }
    }
    // d2 index: ((i * n*n + kl) * n + j)
    let d2_at = |i: usize, j: usize, k: usize, l: usize, p: usize| -> Complex64 {
        d2[(i * n * n + k * n + l) * n + j][p]
    };

    let mut torsion = vec![Complex64::default(); total * n * n * n];
    let mut curvature = vec![Complex64::default(); total * n * n * n * n];
    for p in 0..total {
        let gi = g.at(p).hermitian_inverse()?;
        // g^{kl̄} = conj((g⁻¹)_{kl}) = (g⁻¹)_{lk}.
        let up = |k: usize, l: usize| gi.get(l, k);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut t = Complex64::default();
                    for l in 0..n {
                        t += up(k, l) * (d_hol[i][j * n + l][p] - d_hol[j][i * n + l][p]);
                    }
                    torsion[((p * n + k) * n + i) * n + j] = t;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut r = -d2_at(i, j, k, l, p);
                        for pp in 0..n {
                            for q in 0..n {
                                r += up(pp, q)
                                    * d_hol[i][k * n + q][p]
                                    * d_ahol[j][pp * n + l][p];
                            }
                        }
                        curvature[(((p * n + i) * n + j) * n + k) * n + l] = r;
                    }
                }
            }
        }
    }

    Ok(TorsionCurvature { grid, dim: n, torsion, curvature })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_grid() -> Arc<PeriodicGrid> {
        PeriodicGrid::new(2, &[4, 1, 4, 1], &[1.0; 4]).unwrap()
    }

    #[test]
    fn identity_metric_diag_eigenvalues() {
        let g = small_grid();
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        let x = HermitianField::constant(&g, &CMat::diag(&[2.0, 1.0])).unwrap();
        let spec = rel_eigenvalues(&x, &metric).unwrap();
        for p in 0..g.total_points() {
            assert_eq!(spec.at(p), &[1.0, 2.0]);
        }
    }

    #[test]
    fn scaling_metric_halves_eigenvalues() {
        let g = small_grid();
        let omega = HermitianField::constant(&g, &CMat::identity(2).scale(2.0)).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        let x = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let spec = rel_eigenvalues(&x, &metric).unwrap();
        for &v in spec.values() {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn rel_eigen_of_metric_itself_is_one() {
        let g = small_grid();
        let m = CMat::from_rows(2, &[c(3.0, 0.0), c(0.4, 0.7), c(0.4, -0.7), c(2.0, 0.0)]);
        let omega = HermitianField::constant(&g, &m).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        let spec = rel_eigenvalues(&omega, &metric).unwrap();
        for &v in spec.values() {
            assert!((v - 1.0).abs() <= 1e-13);
        }
    }

    #[test]
    fn wedge_ratio_of_omega_is_one() {
        let g = small_grid();
        let m = CMat::from_rows(2, &[c(2.0, 0.0), c(0.3, -0.2), c(0.3, 0.2), c(1.5, 0.0)]);
        let omega = HermitianField::constant(&g, &m).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        let r = wedge_ratio(&[(&omega, 2)], &metric).unwrap();
        assert!((r.sup() - 1.0).abs() < 1e-13 && (r.inf() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn wedge_ratio_two_omega_wedge_omega() {
        // n=2: (2ω ∧ ω)/ω² = 2.
        let g = small_grid();
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let two = omega.scale(2.0);
        let metric = MetricFactors::new(&omega).unwrap();
        let r = wedge_ratio(&[(&two, 1), (&omega, 1)], &metric).unwrap();
        assert!((r.sup() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn wedge_ratio_checks_multiplicity() {
        let g = small_grid();
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        assert!(matches!(
            wedge_ratio(&[(&omega, 1)], &metric),
            Err(Error::MultiplicitySum { got: 1, expected: 2 })
        ));
    }

    #[test]
    fn cone_condition_equal_eigenvalues() {
        // n=2, α=1, λ≡(1,1), ψ≡1: margin 1 − (1/2)·1 = 0.5, satisfied.
        let g = small_grid();
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        let psi = ScalarField::constant(&g, 1.0);
        let rep = cone_condition(&omega, &metric, &psi, 1).unwrap();
        assert!(rep.satisfied);
        assert!((rep.margin - 0.5).abs() < 1e-14);

        // λ≡(0.4,0.4): (1/2)·(1/0.4) = 1.25 > 1, violated.
        let chi = omega.scale(0.4);
        let rep = cone_condition(&chi, &metric, &psi, 1).unwrap();
        assert!(!rep.satisfied);
        assert!((rep.margin - (1.0 - 1.25)).abs() < 1e-12);
    }

    #[test]
    fn cone_condition_not_positive() {
        let g = small_grid();
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        let psi = ScalarField::constant(&g, 1.0);
        let chi = HermitianField::constant(&g, &CMat::diag(&[1.0, -0.5])).unwrap();
        let rep = cone_condition(&chi, &metric, &psi, 1).unwrap();
        assert!(!rep.satisfied && !rep.positive);
        assert!(rep.least_eigenvalue < 0.0);
    }

    #[test]
    fn wedge_ratio_symmetric_and_multilinear() {
        use rand::{Rng, SeedableRng};
        let g = small_grid();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rand_pd = |scale: f64| {
            let d0 = rng.gen_range(0.5..2.0) * scale;
            let d1 = rng.gen_range(0.5..2.0) * scale;
            let off = c(0.2 * rng.gen_range(-1.0..1.0), 0.2 * rng.gen_range(-1.0..1.0));
            let m = CMat::from_rows(2, &[c(d0, 0.0), off, off.conj(), c(d1, 0.0)]);
            HermitianField::constant(&g, &m).unwrap()
        };
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        for _ in 0..20 {
            let a = rand_pd(1.0);
            let b = rand_pd(1.0);
            // Symmetry in the factors.
            let ab = wedge_ratio(&[(&a, 1), (&b, 1)], &metric).unwrap();
            let ba = wedge_ratio(&[(&b, 1), (&a, 1)], &metric).unwrap();
            assert!(ab.sub(&ba).unwrap().max_abs() <= 1e-12 * (1.0 + ab.max_abs()));
            // Multilinearity in the first factor: D(a + 2a', b) = D(a, b) + 2D(a', b).
            let a2 = rand_pd(0.7);
            let combo = a.add(&a2.scale(2.0)).unwrap();
            let lhs = wedge_ratio(&[(&combo, 1), (&b, 1)], &metric).unwrap();
            let r1 = wedge_ratio(&[(&a, 1), (&b, 1)], &metric).unwrap();
            let r2 = wedge_ratio(&[(&a2, 1), (&b, 1)], &metric).unwrap();
            let rhs = r1.add(&r2.scale(2.0)).unwrap();
            assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * (1.0 + lhs.max_abs()));
        }
    }

    #[test]
    fn cone_condition_rescaling_invariance() {
        // (χ', ω, ψ) → (cχ', cω, ψ) leaves the reduced inequality alone.
        let g = small_grid();
        let psi = ScalarField::from_fn(&g, |x| 1.0 + 0.3 * (std::f64::consts::TAU * x[0]).cos());
        let chi = HermitianField::constant(&g, &CMat::diag(&[1.2, 0.9])).unwrap();
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let base = cone_condition(&chi, &MetricFactors::new(&omega).unwrap(), &psi, 1).unwrap();
        for scale in [0.25, 3.7] {
            let m2 = MetricFactors::new(&omega.scale(scale)).unwrap();
            let rep = cone_condition(&chi.scale(scale), &m2, &psi, 1).unwrap();
            assert_eq!(rep.satisfied, base.satisfied);
            assert!((rep.margin - base.margin).abs() <= 1e-12 * (1.0 + base.margin.abs()));
        }
    }

    #[test]
    fn flat_metric_torsion_curvature_zero() {
        let g = small_grid();
        let m = CMat::from_rows(2, &[c(1.5, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(2.0, 0.0)]);
        let omega = HermitianField::constant(&g, &m).unwrap();
        let ops = SpectralOps::new(&g);
        let tc = torsion_curvature(&omega, &ops).unwrap();
        assert!(tc.max_torsion() < 1e-14);
        assert!(tc.max_curvature() < 1e-14);
    }

    #[test]
    fn curvature_symmetry_on_smooth_metric() {
        let g = PeriodicGrid::new(2, &[8, 8, 8, 1], &[1.0; 4]).unwrap();
        let eps = 0.05;
        let omega = HermitianField::from_fn(&g, |x| {
            let s = (eps * (TAU * x[0]).cos()).exp();
            let mut m = CMat::identity(2).scale(s);
            m.set(0, 1, c(0.1 * (TAU * x[1]).sin(), 0.02));
            m.set(1, 0, c(0.1 * (TAU * x[1]).sin(), -0.02));
            m
        })
        .unwrap();
        let ops = SpectralOps::new(&g);
        let tc = torsion_curvature(&omega, &ops).unwrap();
        assert!(tc.torsion_antisymmetry_defect() < 1e-10);
        assert!(tc.curvature_symmetry_defect() < 1e-8);
        assert!(tc.max_torsion() > 1e-3); // genuinely non-flat
    }
}
