//! Dense complex matrices of dimension ≤ [`MAX_DIM`], kept on the stack.
//!
//! The flow evaluates a pointwise eigenproblem at every grid point of every
//! stage, so these kernels avoid allocation entirely. Eigenvalues of a
//! Hermitian matrix relative to a positive metric are obtained by congruence:
//! factor `g = L Lᴴ`, transform `X̃ = L⁻¹ X L⁻ᴴ`, then diagonalize `X̃` with
//! cyclic complex Jacobi rotations (one rotation is exact for 2×2).

use crate::{Error, Result, MAX_DIM};
use num_complex::Complex64;

const LEN: usize = MAX_DIM * MAX_DIM;

/// Stack-allocated `n×n` complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat {
    n: usize,
    a: [Complex64; LEN],
}

impl CMat {
    pub fn zero(n: usize) -> Self {
        debug_assert!(n >= 1 && n <= MAX_DIM);
        Self { n, a: [Complex64::new(0.0, 0.0); LEN] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zero(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, Complex64::new(v, 0.0));
        }
        m
    }

    pub fn from_rows(n: usize, rows: &[Complex64]) -> Self {
        debug_assert_eq!(rows.len(), n * n);
        let mut m = Self::zero(n);
        m.a[..n * n].copy_from_slice(rows);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.n + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.a[..self.n * self.n]
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        let mut out = *self;
        for k in 0..self.n * self.n {
            out.a[k] += rhs.a[k];
        }
        out
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        let mut out = *self;
        for k in 0..self.n * self.n {
            out.a[k] -= rhs.a[k];
        }
        out
    }

    pub fn scale(&self, s: f64) -> CMat {
        let mut out = *self;
        for k in 0..self.n * self.n {
            out.a[k] *= s;
        }
        out
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        let n = self.n;
        let mut out = CMat::zero(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                for j in 0..n {
                    out.a[i * n + j] += aik * rhs.get(k, j);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zero(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, self.get(j, i).conj());
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|a_ij − conj(a_ji)|` over all entries.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    /// Hermitian part `(A + Aᴴ)/2` with real diagonal.
    pub fn hermitian_part(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zero(n);
        for i in 0..n {
            out.set(i, i, Complex64::new(self.get(i, i).re, 0.0));
            for j in i + 1..n {
                let v = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
                out.set(i, j, v);
                out.set(j, i, v.conj());
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> Complex64 {
        let n = self.n;
        let mut m = *self;
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let mut piv = col;
            let mut best = m.get(col, col).norm();
            for r in col + 1..n {
                let v = m.get(r, col).norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if piv != col {
                for j in 0..n {
                    let t = m.get(col, j);
                    m.set(col, j, m.get(piv, j));
                    m.set(piv, j, t);
                }
                det = -det;
            }
            let d = m.get(col, col);
            det *= d;
            for r in col + 1..n {
                let f = m.get(r, col) / d;
                for j in col..n {
                    let v = m.get(r, j) - f * m.get(col, j);
                    m.set(r, j, v);
                }
            }
        }
        det
    }

    /// Cholesky factor `L` with `A = L Lᴴ`; fails when a pivot is not
    /// strictly positive.
    pub fn cholesky(&self) -> Result<CMat> {
        let n = self.n;
        let mut l = CMat::zero(n);
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= l.get(j, k).norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { point: 0, least: d });
            }
            let dj = d.sqrt();
            l.set(j, j, Complex64::new(dj, 0.0));
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k).conj();
                }
                l.set(i, j, s / dj);
            }
        }
        Ok(l)
    }

    /// Solve `L y = b` for lower-triangular `L`, overwriting `b`.
    fn solve_lower_inplace(&self, b: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.get(i, k) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
    }

    /// Solve `Lᴴ y = b` with `self = L` lower-triangular, overwriting `b`.
    fn solve_adjoint_lower_inplace(&self, b: &mut [Complex64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.get(k, i).conj() * b[k];
            }
            b[i] = s / self.get(i, i).conj();
        }
    }

    /// With `self = L` the Cholesky factor of the metric, returns
    /// `L⁻ᴴ U` (columns of `U` mapped to the g-orthonormal frame).
    pub fn adjoint_solve_columns(&self, u: &CMat) -> CMat {
        let n = self.n;
        let mut out = CMat::zero(n);
        let mut col = [Complex64::new(0.0, 0.0); MAX_DIM];
        for j in 0..n {
            for i in 0..n {
                col[i] = u.get(i, j);
            }
            self.solve_adjoint_lower_inplace(&mut col[..n]);
            for i in 0..n {
                out.set(i, j, col[i]);
            }
        }
        out
    }

    /// Congruence reduction: with `self = L` (lower Cholesky factor of the
    /// metric), returns `L⁻¹ X L⁻ᴴ`. Hermitian input gives Hermitian output.
    pub fn congruence_reduce(&self, x: &CMat) -> CMat {
        let n = self.n;
        // Z = L⁻¹ X, column by column.
        let mut z = CMat::zero(n);
        let mut col = [Complex64::new(0.0, 0.0); MAX_DIM];
        for j in 0..n {
            for i in 0..n {
                col[i] = x.get(i, j);
            }
            self.solve_lower_inplace(&mut col[..n]);
            for i in 0..n {
                z.set(i, j, col[i]);
            }
        }
        // X̃ = Z L⁻ᴴ = (L⁻¹ Zᴴ)ᴴ.
        let zh = z.adjoint();
        let mut w = CMat::zero(n);
        for j in 0..n {
            for i in 0..n {
                col[i] = zh.get(i, j);
            }
            self.solve_lower_inplace(&mut col[..n]);
            for i in 0..n {
                w.set(i, j, col[i]);
            }
        }
        w.adjoint().hermitian_part()
    }

    /// Inverse of a Hermitian positive-definite matrix via Cholesky:
    /// `A⁻¹ = L⁻ᴴ L⁻¹` with `A = L Lᴴ`.
    pub fn hermitian_inverse(&self) -> Result<CMat> {
        let n = self.n;
        let l = self.cholesky()?;
        // Y = L⁻¹, column by column.
        let mut y = CMat::zero(n);
        let mut col = [Complex64::new(0.0, 0.0); MAX_DIM];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate().take(n) {
                *c = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            }
            l.solve_lower_inplace(&mut col[..n]);
            for i in 0..n {
                y.set(i, j, col[i]);
            }
        }
        Ok(y.adjoint().mul(&y).hermitian_part())
    }

    /// Reconstruct `V diag(d) Vᴴ`.
    pub fn from_eigen(v: &CMat, d: &[f64]) -> CMat {
        let n = v.n;
        let mut out = CMat::zero(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += v.get(i, k) * d[k] * v.get(j, k).conj();
                }
                out.set(i, j, s);
            }
        }
        out.hermitian_part()
    }
}

/// Eigenvalues (ascending) of a Hermitian 2×2 matrix, closed form.
#[inline]
pub fn eigen2(a: &CMat) -> [f64; 2] {
    let p = a.get(0, 0).re;
    let q = a.get(1, 1).re;
    let mean = 0.5 * (p + q);
    let r = (0.25 * (p - q) * (p - q) + a.get(0, 1).norm_sqr()).sqrt();
    [mean - r, mean + r]
}

/// Eigenvalues of a Hermitian matrix, ascending, by cyclic complex Jacobi.
/// When `vectors` is requested the returned matrix holds the eigenvectors
/// as columns in the same order as the eigenvalues.
pub fn hermitian_eigen(a: &CMat, want_vectors: bool) -> ([f64; MAX_DIM], Option<CMat>) {
    let n = a.dim();
    let mut m = a.hermitian_part();
    let mut v = if want_vectors { Some(CMat::identity(n)) } else { None };

    if n >= 2 {
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        let tol = 1e-15 * scale;
        for _sweep in 0..30 {
            let mut off: f64 = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(m.get(p, q).norm());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m.get(p, q);
                    let abs = apq.norm();
                    if abs <= tol * 1e-2 {
                        continue;
                    }
                    let u = apq / abs;
                    let tau = (m.get(q, q).re - m.get(p, p).re) / (2.0 * abs);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    let app = m.get(p, p).re;
                    let aqq = m.get(q, q).re;
                    m.set(p, p, Complex64::new(app - t * abs, 0.0));
                    m.set(q, q, Complex64::new(aqq + t * abs, 0.0));
                    m.set(p, q, Complex64::new(0.0, 0.0));
                    m.set(q, p, Complex64::new(0.0, 0.0));
                    for k in 0..n {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = m.get(k, p);
                        let akq = m.get(k, q);
                        let nkp = akp * c - akq * (s * u.conj());
                        let nkq = akp * (s * u) + akq * c;
                        m.set(k, p, nkp);
                        m.set(p, k, nkp.conj());
                        m.set(k, q, nkq);
                        m.set(q, k, nkq.conj());
                    }
                    if let Some(vm) = v.as_mut() {
                        for k in 0..n {
                            let vkp = vm.get(k, p);
                            let vkq = vm.get(k, q);
                            vm.set(k, p, vkp * c - vkq * (s * u.conj()));
                            vm.set(k, q, vkp * (s * u) + vkq * c);
                        }
                    }
                }
            }
        }
    }

    let mut vals = [0.0f64; MAX_DIM];
    for i in 0..n {
        vals[i] = m.get(i, i).re;
    }
    // Ascending, ties kept in input order.
    let mut order: [usize; MAX_DIM] = [0, 1, 2, 3];
    order[..n].sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let mut sorted = [0.0f64; MAX_DIM];
    for i in 0..n {
        sorted[i] = vals[order[i]];
    }
    let vecs = v.map(|vm| {
        let mut out = CMat::zero(n);
        for (new_col, &old_col) in order[..n].iter().enumerate() {
            for r in 0..n {
                out.set(r, new_col, vm.get(r, old_col));
            }
        }
        out
    });
    (sorted, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn jacobi_diagonalizes_known_hermitian() {
        // [[2, 1-i], [1+i, 3]] has eigenvalues (5 ∓ √13)/2... check via trace/det.
        let a = CMat::from_rows(2, &[c(2.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(3.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen(&a, true);
        let disc = (1.0f64 + 4.0 * 2.0).sqrt(); // (tr/2)² - det = 0.25 + 2
        let lo = 2.5 - 0.5 * (1.0 + 8.0f64).sqrt();
        let hi = 2.5 + 0.5 * (1.0 + 8.0f64).sqrt();
        let _ = disc;
        assert!((vals[0] - lo).abs() < 1e-13);
        assert!((vals[1] - hi).abs() < 1e-13);
        assert!((eigen2(&a)[0] - vals[0]).abs() < 1e-13);
        // Reconstruction.
        let r = CMat::from_eigen(&vecs.unwrap(), &vals[..2]);
        assert!(r.sub(&a).max_abs() < 1e-13);
    }

    #[test]
    fn jacobi_handles_repeated_eigenvalues() {
        let a = CMat::from_rows(3, &{
            let mut v = vec![c(0.0, 0.0); 9];
            v[0] = c(2.0, 0.0);
            v[4] = c(2.0, 0.0);
            v[8] = c(5.0, 0.0);
            v
        });
        let (vals, _) = hermitian_eigen(&a, false);
        assert_eq!(&vals[..3], &[2.0, 2.0, 5.0]);
    }

    #[test]
    fn cholesky_congruence_recovers_identity() {
        let g = CMat::from_rows(2, &[c(4.0, 0.0), c(1.0, 0.5), c(1.0, -0.5), c(3.0, 0.0)]);
        let l = g.cholesky().unwrap();
        let id = l.congruence_reduce(&g);
        assert!(id.sub(&CMat::identity(2)).max_abs() < 1e-14);
        let linv = g.hermitian_inverse().unwrap();
        assert!(g.mul(&linv).sub(&CMat::identity(2)).max_abs() < 1e-13);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let g = CMat::from_rows(2, &[c(1.0, 0.0), c(3.0, 0.0), c(3.0, 0.0), c(1.0, 0.0)]);
        assert!(g.cholesky().is_err());
    }

    #[test]
    fn det_matches_eigenvalue_product() {
        let a = CMat::from_rows(
            3,
            &[
                c(3.0, 0.0),
                c(0.5, 0.2),
                c(0.1, -0.3),
                c(0.5, -0.2),
                c(2.0, 0.0),
                c(0.4, 0.1),
                c(0.1, 0.3),
                c(0.4, -0.1),
                c(1.5, 0.0),
            ],
        );
        let (vals, _) = hermitian_eigen(&a, false);
        let prod: f64 = vals[..3].iter().product();
        let d = a.det();
        assert!((d.re - prod).abs() < 1e-12 && d.im.abs() < 1e-12);
    }
}
