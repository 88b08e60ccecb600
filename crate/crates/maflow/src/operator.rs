//! The Monge-Ampère-type operator, admissibility, the cohomological
//! invariant `c`, and the linearized metric.
//!
//! With `X = χ_u = χ + [∂²u/∂z^i∂z̄^j]` and `λ` its eigenvalues relative to
//! `ω`, the flow's right-hand side is evaluated in reduced form
//!
//! ```text
//!     F = ln C(n,α) − ln ψ − ln S_α(1/λ),
//! ```
//!
//! which equals `ln(χ_u^n/(χ_u^{n-α}∧ω^α)) − ln ψ` by the identity
//! `S_{n-α}(λ) = S_α(1/λ)·∏λ`. The wedge-product form is kept as a
//! cross-checking oracle; the eigenvalue path is numerically stabler near
//! the cone boundary.

use crate::field::{integrate, HermitianField, ScalarField};
use crate::grid::check_same_grid;
use crate::herm::{rel_eigenvalues, wedge_ratio, MetricFactors};
use crate::linalg::{eigen2, hermitian_eigen, CMat};
use crate::spectral::{HessianScratch, SpectralOps};
use crate::symfunc::{binomial, elem_sym_all, ratio_fn_gradient};
use crate::{Error, Result, MAX_DIM, POSITIVITY_FLOOR};
use rayon::prelude::*;
use std::sync::Arc;

/// Full problem statement: dimensions, background forms, and the density.
/// Heavy derived data (metric factorization, FFT plans) is shared behind
/// `Arc` so stage solvers can swap `ψ` cheaply.
#[derive(Clone)]
pub struct ProblemData {
    n: usize,
    alpha: usize,
    omega: Arc<HermitianField>,
    chi: Arc<HermitianField>,
    psi: Arc<ScalarField>,
    log_psi: Arc<ScalarField>,
    metric: Arc<MetricFactors>,
    spectral: Arc<SpectralOps>,
    ln_c_na: f64,
}

impl ProblemData {
    pub fn new(
        omega: HermitianField,
        chi: HermitianField,
        psi: ScalarField,
        alpha: usize,
    ) -> Result<Self> {
        let n = omega.dim();
        check_same_grid(omega.grid(), chi.grid())?;
        check_same_grid(omega.grid(), psi.grid())?;
        if alpha < 1 || alpha > n {
            return Err(Error::Scenario(format!("alpha {alpha} outside 1..={n}")));
        }
        psi.check_finite()?;
        if psi.inf() <= 0.0 {
            return Err(Error::Scenario("psi must be positive everywhere".into()));
        }
        let metric = Arc::new(MetricFactors::new(&omega)?);
        let spectral = Arc::new(SpectralOps::new(omega.grid()));
        let log_psi = Arc::new(psi.map(f64::ln));
        Ok(Self {
            n,
            alpha,
            omega: Arc::new(omega),
            chi: Arc::new(chi),
            psi: Arc::new(psi),
            log_psi,
            metric,
            spectral,
            ln_c_na: binomial(n, alpha).ln(),
        })
    }

    /// Same geometry with a different density (continuity stages).
    pub fn with_psi(&self, psi: ScalarField) -> Result<Self> {
        check_same_grid(self.omega.grid(), psi.grid())?;
        psi.check_finite()?;
        if psi.inf() <= 0.0 {
            return Err(Error::Scenario("psi must be positive everywhere".into()));
        }
        let log_psi = Arc::new(psi.map(f64::ln));
        let mut out = self.clone();
        out.psi = Arc::new(psi);
        out.log_psi = log_psi;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn omega(&self) -> &HermitianField {
        &self.omega
    }

    pub fn chi(&self) -> &HermitianField {
        &self.chi
    }

    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    pub fn metric(&self) -> &MetricFactors {
        &self.metric
    }

    pub fn spectral(&self) -> &SpectralOps {
        &self.spectral
    }

    pub fn grid(&self) -> &Arc<crate::grid::PeriodicGrid> {
        self.omega.grid()
    }

    pub fn ln_c_na(&self) -> f64 {
        self.ln_c_na
    }

    /// `∫ f · ω^n` over the torus.
    pub fn integrate_omega(&self, f: &ScalarField) -> Result<f64> {
        integrate(f, self.metric.vol_density())
    }

    /// Total volume `∫ ω^n`.
    pub fn volume_omega(&self) -> f64 {
        self.metric.vol_density().integrate_flat()
    }
}

/// `X = χ_u = χ + (√-1/2)∂∂̄u`.
pub fn chi_u(data: &ProblemData, u: &ScalarField) -> Result<HermitianField> {
    let hess = data.spectral().hessian(u)?;
    data.chi().add(&hess)
}

/// `chi_u` into a caller-owned buffer, reusing FFT scratch; the addition
/// of `χ` is fused into the Hessian scatter pass.
pub fn chi_u_into(
    data: &ProblemData,
    u: &ScalarField,
    scratch: &mut HessianScratch,
    out: &mut HermitianField,
) -> Result<()> {
    data.spectral().hessian_base_into(u, Some(data.chi()), scratch, out)
}

/// Pointwise statistics produced alongside the operator value.
#[derive(Debug, Clone, Copy)]
pub struct RhsStats {
    pub least_rel_eig: f64,
    pub worst_point: usize,
    /// Upper bound on the largest eigenvalue of the diffusion coefficient
    /// `[F^{ij̄}]/F` of the linearized flow, over all grid points.
    pub diffusion_max: f64,
}

impl RhsStats {
    pub fn admissible(&self) -> bool {
        self.least_rel_eig > POSITIVITY_FLOOR
    }
}

/// The flow's right-hand side together with admissibility information.
pub struct OperatorValue {
    pub f: ScalarField,
    pub admissible: bool,
    pub least_rel_eig: f64,
    pub worst_point: usize,
}

/// `L⁻¹ X L⁻ᴴ` for 2×2 Hermitian `X = [[x00, x01],[conj(x01), x11]]` and
/// lower-triangular `L` with real diagonal; returns `(x̃00, x̃01, x̃11)`.
#[inline]
fn reduce2(
    l00: f64,
    l10: num_complex::Complex64,
    l11: f64,
    x00: f64,
    x01: num_complex::Complex64,
    x11: f64,
) -> (f64, num_complex::Complex64, f64) {
    use num_complex::Complex64;
    let i00 = 1.0 / l00;
    let i11 = 1.0 / l11;
    let i10 = -l10 * (i00 * i11);
    // Y = L⁻¹ X.
    let y00 = i00 * x00;
    let y01 = x01 * i00;
    let y10 = i10 * x00 + x01.conj() * i11;
    let y11 = i10 * x01 + Complex64::new(i11 * x11, 0.0);
    // X̃ = Y L⁻ᴴ with L⁻ᴴ = [[i00, conj(i10)], [0, i11]].
    let t00 = y00 * i00;
    let t01 = i10.conj() * y00 + y01 * i11;
    let t11 = (y10 * i10.conj() + y11 * i11).re;
    (t00, t01, t11)
}

/// Specialized `n = 2` evaluation; identity and constant metrics skip the
/// per-point factor lookup.
fn rhs_from_x_n2(data: &ProblemData, x: &HermitianField, f_out: &mut ScalarField) -> RhsStats {
    let alpha = data.alpha;
    let ln_c = data.ln_c_na;
    let metric = data.metric();
    let log_psi = data.log_psi.values();
    let ginv_bound = metric.ginv_max_eig();
    let identity = metric.is_identity();
    let xd = x.data();

    const CH: usize = 2048;
    let stats = f_out
        .values_mut()
        .par_chunks_mut(CH)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * CH;
            let mut least = f64::INFINITY;
            let mut worst = base;
            let mut dmax = 0.0f64;
            for (k, out) in chunk.iter_mut().enumerate() {
                let p = base + k;
                let x00 = xd[4 * p].re;
                let x01 = xd[4 * p + 1];
                let x11 = xd[4 * p + 3].re;
                let (a, b, d) = if identity {
                    (x00, x01, x11)
                } else {
                    let l = metric.chol_at(p);
                    reduce2(l.get(0, 0).re, l.get(1, 0), l.get(1, 1).re, x00, x01, x11)
                };
                let mean = 0.5 * (a + d);
                let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
                let lam0 = mean - r;
                if lam0 < least {
                    least = lam0;
                    worst = p;
                }
                if lam0 > POSITIVITY_FLOOR {
                    let lam = [lam0, mean + r];
                    let (fval, grad) = ratio_fn_gradient(&lam, alpha);
                    *out = ln_c - log_psi[p] + fval.ln();
                    dmax = dmax.max(grad[0].max(grad[1]) / fval * ginv_bound);
                } else {
                    *out = 0.0;
                }
            }
            (least, worst, dmax)
        })
        .reduce(
            || (f64::INFINITY, 0usize, 0.0f64),
            |a, b| {
                let (least, worst) = if b.0 < a.0 { (b.0, b.1) } else { (a.0, a.1) };
                (least, worst, a.2.max(b.2))
            },
        );
    RhsStats { least_rel_eig: stats.0, worst_point: stats.1, diffusion_max: stats.2 }
}

/// Evaluate `F = ln C(n,α) − ln ψ − ln S_α(1/λ)` pointwise from an already
/// assembled `X`; `F` is zeroed at inadmissible points and the flag
/// reports them.
pub fn rhs_from_x(data: &ProblemData, x: &HermitianField, f_out: &mut ScalarField) -> RhsStats {
    if data.n == 2 {
        return rhs_from_x_n2(data, x, f_out);
    }
    let n = data.n;
    let alpha = data.alpha;
    let ln_c = data.ln_c_na;
    let metric = data.metric();
    let log_psi = data.log_psi.values();
    let ginv_bound = metric.ginv_max_eig();
    let total = x.grid().total_points();

    const CH: usize = 2048;
    let stats = f_out
        .values_mut()
        .par_chunks_mut(CH)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * CH;
            let mut least = f64::INFINITY;
            let mut worst = base;
            let mut dmax = 0.0f64;
            for (k, out) in chunk.iter_mut().enumerate() {
                let p = base + k;
                let reduced = metric.reduce(p, &x.at(p));
                let mut lam = [0.0f64; MAX_DIM];
                if n == 2 {
                    lam[..2].copy_from_slice(&eigen2(&reduced));
                } else {
                    let (vals, _) = hermitian_eigen(&reduced, false);
                    lam = vals;
                }
                if lam[0] < least {
                    least = lam[0];
                    worst = p;
                }
                if lam[0] > POSITIVITY_FLOOR {
                    let (fval, grad) = ratio_fn_gradient(&lam[..n], alpha);
                    // F(λ) = 1/S_α(1/λ): RHS = ln C − ln ψ + ln F.
                    *out = ln_c - log_psi[p] + fval.ln();
                    let mut gmax = 0.0f64;
                    for &gi in &grad[..n] {
                        gmax = gmax.max(gi);
                    }
                    dmax = dmax.max(gmax / fval * ginv_bound);
                } else {
                    *out = 0.0;
                }
            }
            (least, worst, dmax)
        })
        .reduce(
            || (f64::INFINITY, 0usize, 0.0f64),
            |a, b| {
                let (least, worst) = if b.0 < a.0 { (b.0, b.1) } else { (a.0, a.1) };
                (least, worst, a.2.max(b.2))
            },
        );
    let _ = total;
    RhsStats { least_rel_eig: stats.0, worst_point: stats.1, diffusion_max: stats.2 }
}

/// Non-erroring operator evaluation; `admissible` is false when any point
/// has a relative eigenvalue at or below the positivity floor.
pub fn try_operator_value(data: &ProblemData, u: &ScalarField) -> Result<OperatorValue> {
    let x = chi_u(data, u)?;
    let mut f = ScalarField::zeros(u.grid());
    let stats = rhs_from_x(data, &x, &mut f);
    Ok(OperatorValue {
        f,
        admissible: stats.admissible(),
        least_rel_eig: stats.least_rel_eig,
        worst_point: stats.worst_point,
    })
}

/// Operator value; errors on inadmissible input, reporting the least
/// relative eigenvalue and the worst point.
pub fn operator_value(data: &ProblemData, u: &ScalarField) -> Result<OperatorValue> {
    let v = try_operator_value(data, u)?;
    if !v.admissible {
        return Err(Error::Inadmissible { least: v.least_rel_eig, point: v.worst_point });
    }
    Ok(v)
}

/// Admissibility of `u`: true iff `λ_min(χ_u rel ω) > 1e-10` at every
/// point; returns the global minimum as well.
pub fn admissible(data: &ProblemData, u: &ScalarField) -> Result<(bool, f64)> {
    let x = chi_u(data, u)?;
    let spec = rel_eigenvalues(&x, data.metric())?;
    let (_, least) = spec.global_min();
    Ok((least > POSITIVITY_FLOOR, least))
}

/// Wedge-form evaluation of the flow's right-hand side,
/// `ln(χ_u^n/ω^n) − ln(χ_u^{n-α}∧ω^α / ω^n) − ln ψ`; the cross-check
/// oracle for [`operator_value`].
pub fn operator_value_wedge(data: &ProblemData, u: &ScalarField) -> Result<ScalarField> {
    let x = chi_u(data, u)?;
    let num = wedge_ratio(&[(&x, data.n)], data.metric())?;
    let den = wedge_ratio(&[(&x, data.n - data.alpha), (data.omega(), data.alpha)], data.metric())?;
    let logs = num.zip_map(&den, |a, b| a.ln() - b.ln())?;
    logs.sub(&data.log_psi)
}

/// The invariant `c = ∫χ^n / ∫χ^{n-α}∧ω^α`.
pub fn invariant_c(data: &ProblemData) -> Result<f64> {
    let num = wedge_ratio(&[(data.chi(), data.n)], data.metric())?;
    let den = wedge_ratio(&[(data.chi(), data.n - data.alpha), (data.omega(), data.alpha)], data.metric())?;
    let num = data.integrate_omega(&num)?;
    let den = data.integrate_omega(&den)?;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Degenerate(format!(
            "denominator ∫χ^(n-α)∧ω^α = {den:.6e} is not positive"
        )));
    }
    Ok(num / den)
}

/// `∫ χ^{n-α} ∧ ω^α` (the J-functional normalizer).
pub fn mixed_volume(data: &ProblemData) -> Result<f64> {
    let den = wedge_ratio(&[(data.chi(), data.n - data.alpha), (data.omega(), data.alpha)], data.metric())?;
    data.integrate_omega(&den)
}

/// Pointwise `χ^n / (χ^{n-α} ∧ ω^α)` (the background density ratio).
pub fn wedge_ratio_of_chi(data: &ProblemData) -> Result<ScalarField> {
    let num = wedge_ratio(&[(data.chi(), data.n)], data.metric())?;
    let den = wedge_ratio(&[(data.chi(), data.n - data.alpha), (data.omega(), data.alpha)], data.metric())?;
    num.zip_map(&den, |a, b| a / b)
}

fn eigen_frame(
    data: &ProblemData,
    p: usize,
    x: &HermitianField,
) -> Result<(usize, [f64; MAX_DIM], CMat)> {
    let n = data.n;
    let l = data.metric().chol_at(p);
    let reduced = data.metric().reduce(p, &x.at(p));
    let (lam, u) = hermitian_eigen(&reduced, true);
    if lam[0] <= POSITIVITY_FLOOR {
        return Err(Error::Inadmissible { least: lam[0], point: p });
    }
    // Columns q_k of Q = L⁻ᴴU are g-orthonormal eigenvectors of the pencil.
    let q = l.adjoint_solve_columns(&u.unwrap());
    Ok((n, lam, q))
}

/// The Hermitian form `[F^{ij̄}] = ∂F/∂X_{ij̄}` with
/// `F(u) = S_n(X)/S_{n-α}(X)`, assembled in the eigenframe as
/// `Q diag(∂F/∂λ_i) Qᴴ`. Contractions read `Σ F^{ij̄} a_i conj(a_j) =
/// aᴴ·[F^{ij̄}]·a`. Positive definite at admissible points (ellipticity).
pub fn operator_derivative(data: &ProblemData, u: &ScalarField) -> Result<HermitianField> {
    let x = chi_u(data, u)?;
    operator_derivative_from_x(data, &x)
}

pub fn operator_derivative_from_x(
    data: &ProblemData,
    x: &HermitianField,
) -> Result<HermitianField> {
    let n = data.n;
    let total = x.grid().total_points();
    let mut out = HermitianField::zeros(x.grid());
    let results: Vec<Result<CMat>> = (0..total)
        .into_par_iter()
        .map(|p| {
            let (_, lam, q) = eigen_frame(data, p, x)?;
            let (_, grad) = ratio_fn_gradient(&lam[..n], data.alpha);
            Ok(CMat::from_eigen(&q, &grad[..n]))
        })
        .collect();
    for (p, r) in results.into_iter().enumerate() {
        out.set_at(p, &r?);
    }
    Ok(out)
}

/// The linearized metric `G_{ij̄} = F(u)·F_{ij̄}(u)` with `[F_{ij̄}]` the
/// inverse of `[F^{ij̄}]`. The companion diffusion form consumed by the
/// stability bound and the Harnack diagnostics is `G^{ij̄} = F⁻¹ F^{ij̄}`,
/// exposed by [`diffusion_form`].
pub fn linearized_metric(data: &ProblemData, u: &ScalarField) -> Result<HermitianField> {
    let x = chi_u(data, u)?;
    let n = data.n;
    let total = x.grid().total_points();
    let mut out = HermitianField::zeros(x.grid());
    let results: Vec<Result<CMat>> = (0..total)
        .into_par_iter()
        .map(|p| {
            let (_, lam, q) = eigen_frame(data, p, &x)?;
            let (fval, grad) = ratio_fn_gradient(&lam[..n], data.alpha);
            let mut inv_grad = [0.0f64; MAX_DIM];
            for i in 0..n {
                if grad[i] < 1e-300 {
                    return Err(Error::SingularLinearization { point: p });
                }
                inv_grad[i] = fval / grad[i];
            }
            // [F_{ij̄}] = inverse form of Q diag(grad) Qᴴ = V diag(1/grad) Vᴴ
            // with V = (Qᴴ)⁻¹ = L·U; scaled by F.
            let l = data.metric().chol_at(p);
            let v = l.mul(&q_to_u(l, &q));
            Ok(CMat::from_eigen(&v, &inv_grad[..n]))
        })
        .collect();
    for (p, r) in results.into_iter().enumerate() {
        out.set_at(p, &r?);
    }
    Ok(out)
}

/// Recover the unitary factor `U = Lᴴ Q`.
fn q_to_u(l: &CMat, q: &CMat) -> CMat {
    l.adjoint().mul(q)
}

/// Diffusion form `G^{ij̄} = F⁻¹·F^{ij̄}` (per-point Hermitian matrices).
pub fn diffusion_form(data: &ProblemData, u: &ScalarField) -> Result<HermitianField> {
    let x = chi_u(data, u)?;
    let n = data.n;
    let total = x.grid().total_points();
    let mut out = HermitianField::zeros(x.grid());
    let results: Vec<Result<CMat>> = (0..total)
        .into_par_iter()
        .map(|p| {
            let (_, lam, q) = eigen_frame(data, p, &x)?;
            let (fval, grad) = ratio_fn_gradient(&lam[..n], data.alpha);
            let mut scaled = [0.0f64; MAX_DIM];
            for i in 0..n {
                scaled[i] = grad[i] / fval;
            }
            Ok(CMat::from_eigen(&q, &scaled[..n]))
        })
        .collect();
    for (p, r) in results.into_iter().enumerate() {
        out.set_at(p, &r?);
    }
    Ok(out)
}

/// Exact largest diffusion eigenvalue over the grid (eigensolve per point;
/// the flow uses the cheaper bound in [`RhsStats::diffusion_max`]).
pub fn diffusion_max_exact(data: &ProblemData, u: &ScalarField) -> Result<f64> {
    let form = diffusion_form(data, u)?;
    let total = form.grid().total_points();
    Ok((0..total)
        .into_par_iter()
        .map(|p| {
            let (vals, _) = hermitian_eigen(&form.at(p), false);
            vals[data.n - 1]
        })
        .reduce(|| 0.0, f64::max))
}

/// `S_α(1/λ)` as a field (diagnostic).
pub fn s_alpha_field(data: &ProblemData, x: &HermitianField) -> Result<ScalarField> {
    let spec = rel_eigenvalues(x, data.metric())?;
    let n = data.n;
    let alpha = data.alpha;
    let total = x.grid().total_points();
    let mut vals = vec![0.0; total];
    vals.par_iter_mut().enumerate().for_each(|(p, v)| {
        let lam = spec.at(p);
        let mut mu = [0.0f64; MAX_DIM];
        for i in 0..n {
            mu[i] = 1.0 / lam[i];
        }
        *v = elem_sym_all(&mu[..n])[alpha];
    });
    ScalarField::from_values(x.grid(), vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use std::f64::consts::TAU;

    fn setup(lam0: f64, psi: f64) -> ProblemData {
        let g = PeriodicGrid::new(2, &[8, 1, 8, 1], &[1.0; 4]).unwrap();
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let chi = HermitianField::constant(&g, &CMat::identity(2).scale(lam0)).unwrap();
        let psi = ScalarField::constant(&g, psi);
        ProblemData::new(omega, chi, psi, 1).unwrap()
    }

    #[test]
    fn constant_chi_gives_constant_operator() {
        // χ = λ₀ω, u = 0, ψ ≡ 1 → F ≡ α ln λ₀.
        let data = setup(2.0, 1.0);
        let u = ScalarField::zeros(data.grid());
        let v = operator_value(&data, &u).unwrap();
        assert!(v.admissible);
        assert!((v.least_rel_eig - 2.0).abs() < 1e-13);
        assert!((v.f.sup() - 2.0f64.ln()).abs() < 1e-14);
        assert!((v.f.inf() - 2.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn x_equals_omega_gives_zero() {
        // X = ω, ψ ≡ 1 → F ≡ 0 since S_α(1,…,1) = C(n,α).
        let data = setup(1.0, 1.0);
        let u = ScalarField::zeros(data.grid());
        let v = operator_value(&data, &u).unwrap();
        assert!(v.f.max_abs() < 1e-15);
    }

    #[test]
    fn psi_shift_property() {
        // ψ ← e^σ ψ shifts F by −σ exactly.
        let data = setup(2.0, 1.0);
        let sigma = 0.37f64;
        let shifted = data.with_psi(data.psi().map(|p| p * sigma.exp())).unwrap();
        let g = data.grid().clone();
        let u = ScalarField::from_fn(&g, |x| 0.02 * (TAU * x[0]).sin());
        let a = operator_value(&data, &u).unwrap().f;
        let b = operator_value(&shifted, &u).unwrap().f;
        let diff = a.sub(&b).unwrap();
        assert!((diff.sup() - sigma).abs() < 1e-14);
        assert!((diff.inf() - sigma).abs() < 1e-14);
    }

    #[test]
    fn translation_invariance() {
        let data = setup(2.0, 1.0);
        let g = data.grid().clone();
        let u = ScalarField::from_fn(&g, |x| 0.05 * (TAU * x[2]).cos());
        let a = operator_value(&data, &u).unwrap().f;
        let b = operator_value(&data, &u.add_scalar(11.25)).unwrap().f;
        // Exact up to FFT round-off on the shifted input.
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-13);
    }

    #[test]
    fn eigen_vs_wedge_route() {
        let data = setup(2.0, 1.3);
        let g = data.grid().clone();
        let u = ScalarField::from_fn(&g, |x| {
            0.04 * (TAU * x[0]).sin() + 0.03 * (TAU * (x[0] + x[2])).cos()
        });
        let a = operator_value(&data, &u).unwrap().f;
        let b = operator_value_wedge(&data, &u).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn admissibility_examples() {
        // χ = 2ω, u = (3/(2π²))·sin(2πx⁰): X₀₀ = 2 − 1.5 sin(2πx⁰), min 0.5.
        let data = setup(2.0, 1.0);
        let g = data.grid().clone();
        let pi = std::f64::consts::PI;
        let amp = 3.0 / (2.0 * pi * pi);
        let u = ScalarField::from_fn(&g, |x| amp * (TAU * x[0]).sin());
        let (ok, least) = admissible(&data, &u).unwrap();
        assert!(ok);
        assert!((least - 0.5).abs() < 1e-9, "least {least}");

        let too_big = u.scale(2.0); // X₀₀ dips to −1
        let (ok, least) = admissible(&data, &too_big).unwrap();
        assert!(!ok && least < 0.0);
    }

    #[test]
    fn invariant_c_examples() {
        // χ = ω → c = 1; χ = 2ω, n=2, α=1 → c = 2.
        let data = setup(1.0, 1.0);
        assert!((invariant_c(&data).unwrap() - 1.0).abs() < 1e-12);
        let data = setup(2.0, 1.0);
        assert!((invariant_c(&data).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invariant_c_diagonal_oracle() {
        // χ = diag(1,2) rel ω = I, n=2, α=1 → c = (2·1·2)/(1+2) = 4/3.
        let g = PeriodicGrid::new(2, &[4, 1, 4, 1], &[1.0; 4]).unwrap();
        let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
        let chi = HermitianField::constant(&g, &CMat::diag(&[1.0, 2.0])).unwrap();
        let psi = ScalarField::constant(&g, 1.0);
        let data = ProblemData::new(omega, chi, psi, 1).unwrap();
        assert!((invariant_c(&data).unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invariant_c_scaling_power() {
        // c(kω) = k^α.
        for alpha in 1..=2usize {
            let g = PeriodicGrid::new(2, &[4, 1, 4, 1], &[1.0; 4]).unwrap();
            let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
            let chi = omega.scale(1.7);
            let psi = ScalarField::constant(&g, 1.0);
            let data = ProblemData::new(omega, chi, psi, alpha).unwrap();
            let c = invariant_c(&data).unwrap();
            assert!((c - 1.7f64.powi(alpha as i32)).abs() <= 1e-12 * c);
        }
    }

    #[test]
    fn linearized_metric_isotropic_case() {
        // X = ω = I, n=2, α=1: F = 1/2, F^{ij̄} = diag(1/4),
        // G = F·(F^{ij̄})⁻¹-form = (1/2)·diag(4)·(1/4)… = diag(2).
        let data = setup(1.0, 1.0);
        let u = ScalarField::zeros(data.grid());
        let p_form = operator_derivative(&data, &u).unwrap();
        let g_metric = linearized_metric(&data, &u).unwrap();
        for p in [0usize, 5, 17] {
            let m = p_form.at(p);
            assert!((m.get(0, 0).re - 0.25).abs() < 1e-13);
            assert!((m.get(1, 1).re - 0.25).abs() < 1e-13);
            assert!(m.get(0, 1).norm() < 1e-13);
            let gm = g_metric.at(p);
            assert!((gm.get(0, 0).re - 2.0).abs() < 1e-12);
            assert!((gm.get(1, 1).re - 2.0).abs() < 1e-12);
        }
        // Diffusion form F^{ij̄}/F = diag(1/2); the cheap bound is exact here.
        let exact = diffusion_max_exact(&data, &u).unwrap();
        assert!((exact - 0.5).abs() < 1e-13);
    }

    #[test]
    fn operator_derivative_positive_definite() {
        // Ellipticity: [F^{ij̄}] is Hermitian positive definite at
        // admissible points, random instances.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = PeriodicGrid::new(2, &[4, 1, 4, 1], &[1.0; 4]).unwrap();
        for _ in 0..25 {
            let d0 = rng.gen_range(0.3..3.0);
            let d1 = rng.gen_range(0.3..3.0);
            let off = num_complex::Complex64::new(
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
            );
            let chi_m = CMat::from_rows(
                2,
                &[
                    num_complex::Complex64::new(d0, 0.0),
                    off,
                    off.conj(),
                    num_complex::Complex64::new(d1, 0.0),
                ],
            );
            let omega = HermitianField::constant(&g, &CMat::identity(2)).unwrap();
            let chi = HermitianField::constant(&g, &chi_m).unwrap();
            let psi = ScalarField::constant(&g, 1.0);
            let Ok(data) = ProblemData::new(omega, chi, psi, rng.gen_range(1..=2)) else {
                continue;
            };
            let u = ScalarField::zeros(&g);
            if admissible(&data, &u).unwrap().0 {
                let p_form = operator_derivative(&data, &u).unwrap();
                let (vals, _) = hermitian_eigen(&p_form.at(0), false);
                assert!(vals[0] > 0.0, "least derivative eigenvalue {:.3e}", vals[0]);
            }
        }
    }

    #[test]
    fn diffusion_bound_dominates_exact() {
        let data = setup(2.0, 1.0);
        let g = data.grid().clone();
        let u = ScalarField::from_fn(&g, |x| 0.08 * (TAU * x[0]).sin());
        let x = chi_u(&data, &u).unwrap();
        let mut f = ScalarField::zeros(&g);
        let stats = rhs_from_x(&data, &x, &mut f);
        let exact = diffusion_max_exact(&data, &u).unwrap();
        assert!(stats.diffusion_max >= exact - 1e-13);
        assert!(stats.diffusion_max <= exact * 1.0 + 1e-13); // identity metric: tight
    }
}
