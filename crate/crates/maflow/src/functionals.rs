//! The J functional, oscillation-decay fitting, and the Harnack diagnostic.
//!
//! `J_α` is defined through its derivative along a path `v(s)` of
//! potentials, `dJ/ds = ∫ v̇ χ_v^{n-α} ∧ ω^α`, and is path independent for
//! closed background forms. Restricting to the straight line `v = s·u`
//! yields the closed form
//!
//! ```text
//!     J_α(u) = 1/(n-α+1) Σ_{i=0}^{n-α} ∫ u · χ_u^i ∧ χ^{n-α-i} ∧ ω^α,
//! ```
//!
//! which the path quadrature must reproduce — a cross-check of the whole
//! wedge algebra. Oscillation decay `θ(t) ≤ C e^{-c₀ t}` and the Harnack
//! inequality are *measurements* on flow output: the constants in the
//! underlying estimates are non-constructive, so fits and implied constants
//! are reported, not asserted with fixed values.

use crate::field::{integrate, HermitianField, ScalarField};
use crate::grid::check_same_grid;
use crate::herm::wedge_ratio;
use crate::operator::{chi_u, ProblemData};
use crate::spectral::{DerivOrder, SpectralOps};
use crate::util::linear_fit;
use crate::{Error, Result, MAX_DIM};
use num_complex::Complex64;
use rayon::prelude::*;

/// `J_α(u)` by the straight-line closed form. Purely algebraic in the
/// endpoint; admissibility along the segment is not required.
pub fn j_alpha_closed(u: &ScalarField, data: &ProblemData) -> Result<f64> {
    check_same_grid(u.grid(), data.grid())?;
    let n = data.dim();
    let alpha = data.alpha();
    let x = chi_u(data, u)?;
    let mut total = 0.0;
    for i in 0..=(n - alpha) {
        let mut factors: Vec<(&HermitianField, usize)> = Vec::new();
        if i > 0 {
            factors.push((&x, i));
        }
        if n - alpha - i > 0 {
            factors.push((data.chi(), n - alpha - i));
        }
        factors.push((data.omega(), alpha));
        let density = wedge_ratio(&factors, data.metric())?;
        let weighted = u.zip_map(&density, |a, b| a * b)?;
        total += integrate(&weighted, data.metric().vol_density())?;
    }
    Ok(total / (n - alpha + 1) as f64)
}

/// Straight-line path `v(s) = s·u` sampled at `nodes` uniform parameters.
pub fn straight_line_path(u: &ScalarField, nodes: usize) -> Vec<(f64, ScalarField)> {
    let m = nodes.max(2);
    (0..m)
        .map(|k| {
            let s = k as f64 / (m - 1) as f64;
            (s, u.scale(s))
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for j in 2..=n {
            let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        xs[k] = x;
        ws[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Lagrange evaluation and differentiation coefficients at `s` for the
/// window of nodes `s_j`, exact through degree `window−1 ≥ 4`.
fn lagrange_coeffs(s: f64, nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = nodes.len();
    let mut val = vec![0.0; w];
    let mut der = vec![0.0; w];
    for k in 0..w {
        // L_k(s) and L'_k(s).
        let mut lk = 1.0;
        for j in 0..w {
            if j != k {
                lk *= (s - nodes[j]) / (nodes[k] - nodes[j]);
            }
        }
        val[k] = lk;
        let mut dsum = 0.0;
        for m in 0..w {
            if m == k {
                continue;
            }
            let mut term = 1.0 / (nodes[k] - nodes[m]);
            for j in 0..w {
                if j != k && j != m {
                    term *= (s - nodes[j]) / (nodes[k] - nodes[j]);
                }
            }
            dsum += term;
        }
        der[k] = dsum;
    }
    (val, der)
}

const GL_NODES: usize = 16;
const GL_PANELS: usize = 2;
const INTERP_WINDOW: usize = 5;

/// `J_α` by composite Gauss–Legendre quadrature of
/// `∫₀¹ ∫ v̇ χ_{v}^{n-α} ∧ ω^α ds` along an arbitrary admissible path given
/// as uniformly spaced `(s, field)` nodes from `s = 0` (where `v = 0`) to
/// `s = 1`. `v` and `∂v/∂s` at quadrature points come from centered
/// 5-point Lagrange stencils (order ≥ 4).
pub fn j_alpha_path(path: &[(f64, ScalarField)], data: &ProblemData) -> Result<f64> {
    if path.len() < 3 {
        return Err(Error::PathTooShort { got: path.len(), needed: 3 });
    }
    let m = path.len();
    let h = 1.0 / (m - 1) as f64;
    for (k, (s, field)) in path.iter().enumerate() {
        check_same_grid(field.grid(), data.grid())?;
        if (s - k as f64 * h).abs() > 1e-12 {
            return Err(Error::Degenerate(
                "path nodes must be uniformly spaced on [0,1]".into(),
            ));
        }
    }
    if path[0].1.max_abs() > 1e-12 {
        return Err(Error::Degenerate("path must start at the zero potential".into()));
    }

    let (gx, gw) = gauss_legendre(GL_NODES);
    let n = data.dim();
    let alpha = data.alpha();
    let mut total = 0.0;
    for panel in 0..GL_PANELS {
        let a = panel as f64 / GL_PANELS as f64;
        let b = (panel + 1) as f64 / GL_PANELS as f64;
        for (x, w) in gx.iter().zip(&gw) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let weight = 0.5 * (b - a) * w;

            // Interpolation window centred on s.
            let win = INTERP_WINDOW.min(m);
            let center = (s / h).round() as isize;
            let lo = (center - (win as isize - 1) / 2)
                .clamp(0, (m - win) as isize) as usize;
            let nodes: Vec<f64> = (0..win).map(|j| (lo + j) as f64 * h).collect();
            let (cv, cd) = lagrange_coeffs(s, &nodes);

            let mut v = ScalarField::zeros(data.grid());
            let mut vdot = ScalarField::zeros(data.grid());
            for j in 0..win {
                v.axpy(cv[j], &path[lo + j].1);
                vdot.axpy(cd[j], &path[lo + j].1);
            }

            let xv = chi_u(data, &v)?;
            let mut factors: Vec<(&HermitianField, usize)> = Vec::new();
            if n - alpha > 0 {
                factors.push((&xv, n - alpha));
            }
            factors.push((data.omega(), alpha));
            let density = wedge_ratio(&factors, data.metric())?;
            let integrand = vdot.zip_map(&density, |p, q| p * q)?;
            total += weight * integrate(&integrand, data.metric().vol_density())?;
        }
    }
    Ok(total)
}

/// `sup f − inf f` over grid points.
pub fn oscillation(f: &ScalarField) -> f64 {
    f.oscillation()
}

/// Exponential-decay fit `θ(t) ≈ C e^{-c₀ t}`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DecayFit {
    pub c: f64,
    pub c0: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Least squares of `ln θ` against `t` over the last half of the usable
/// samples; rows at or below the noise floor are excluded.
pub fn fit_decay(samples: &[(f64, f64)], noise_floor: f64) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(_, th)| th > noise_floor && th.is_finite())
        .collect();
    if usable.len() < 10 {
        return Err(Error::InsufficientData { got: usable.len(), needed: 10 });
    }
    let tail = &usable[usable.len() / 2..];
    let ts: Vec<f64> = tail.iter().map(|&(t, _)| t).collect();
    let ys: Vec<f64> = tail.iter().map(|&(_, th)| th.ln()).collect();
    let (a, b, r2) = linear_fit(&ts, &ys);
    Ok(DecayFit {
        c: a.exp(),
        c0: -b,
        r_squared: r2,
        window: (ts[0], ts[ts.len() - 1]),
    })
}

/// Per-unit-interval contraction ratios `θ(m)/θ(m-1)` at integer time
/// marks (nearest sample), skipping marks below the noise floor.
pub fn oscillation_contraction(
    samples: &[(f64, f64)],
    noise_floor: f64,
) -> Result<Vec<(u32, f64)>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData { got: 0, needed: 1 });
    }
    let t_max = samples.last().unwrap().0;
    let marks = t_max.floor() as u32;
    if marks < 3 {
        return Err(Error::InsufficientData { got: marks as usize, needed: 3 });
    }
    let theta_at = |t: f64| -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for &(tt, th) in samples {
            let d = (tt - t).abs();
            if d < best.0 {
                best = (d, th);
            }
        }
        best.1
    };
    let mut out = Vec::new();
    for mark in 1..=marks {
        let prev = theta_at(mark as f64 - 1.0);
        let cur = theta_at(mark as f64);
        if prev > noise_floor && cur > noise_floor {
            out.push((mark, cur / prev));
        }
    }
    Ok(out)
}

/// Evaluation of the Harnack comparison
/// `sup φ(t₁) ≤ inf φ(t₂) · (t₂/t₁)^{C₂} · e^{C₃/(t₂-t₁) + C₁(t₂-t₁)}`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HarnackReport {
    pub t1: f64,
    pub t2: f64,
    pub sup_at_t1: f64,
    pub inf_at_t2: f64,
    /// Whether finite constants can satisfy the bound at all
    /// (`inf φ(t₂) > 0`).
    pub satisfied_for_some_constants: bool,
    /// `sup φ(t₁) / inf φ(t₂)`, the minimal right-side multiplier.
    pub implied_constant: f64,
    /// Whether the bound holds for the supplied `(C₁, C₂, C₃)`.
    pub satisfied: bool,
}

pub fn harnack_check(
    phi_t1: &ScalarField,
    phi_t2: &ScalarField,
    t1: f64,
    t2: f64,
    constants: (f64, f64, f64),
) -> Result<HarnackReport> {
    check_same_grid(phi_t1.grid(), phi_t2.grid())?;
    if !(t1 > 0.0 && t2 > t1) {
        return Err(Error::Degenerate(format!("need 0 < t1 < t2, got {t1}, {t2}")));
    }
    if phi_t1.inf() <= 0.0 || phi_t2.inf() <= 0.0 {
        return Err(Error::Degenerate(
            "Harnack comparison applies to positive fields only".into(),
        ));
    }
    let (c1, c2, c3) = constants;
    let sup1 = phi_t1.sup();
    let inf2 = phi_t2.inf();
    let rhs = inf2 * (t2 / t1).powf(c2) * (c3 / (t2 - t1) + c1 * (t2 - t1)).exp();
    Ok(HarnackReport {
        t1,
        t2,
        sup_at_t1: sup1,
        inf_at_t2: inf2,
        satisfied_for_some_constants: inf2 > 0.0,
        implied_constant: sup1 / inf2,
        satisfied: sup1 <= rhs,
    })
}

/// `|∂f|²_G = Σ G^{ij̄} ∂_i f ∂̄_j f` for a Hermitian coefficient form
/// (e.g. the diffusion form of the linearized flow).
pub fn grad_sq_g(
    f: &ScalarField,
    g_form: &HermitianField,
    ops: &SpectralOps,
) -> Result<ScalarField> {
    check_same_grid(f.grid(), g_form.grid())?;
    let n = g_form.dim();
    let total = f.grid().total_points();
    // Real-axis first derivatives, then ∂_i = ½(D_{2i} − i D_{2i+1}).
    let mut dre = Vec::with_capacity(2 * n);
    for a in 0..2 * n {
        dre.push(ops.derivative(f, a, DerivOrder::First)?);
    }
    let mut vals = vec![0.0; total];
    vals.par_iter_mut().enumerate().for_each(|(p, out)| {
        let mut w = [Complex64::default(); MAX_DIM];
        for i in 0..n {
            w[i] = Complex64::new(
                0.5 * dre[2 * i].values()[p],
                -0.5 * dre[2 * i + 1].values()[p],
            );
        }
        let m = g_form.at(p);
        let mut acc = Complex64::default();
        for i in 0..n {
            for j in 0..n {
                acc += w[i].conj() * m.get(i, j) * w[j];
            }
        }
        *out = acc.re;
    });
    ScalarField::from_values(f.grid(), vals)
}

/// The optional monitor `|∂ ln φ|²_G − β·∂_t ln φ` at the midpoint of two
/// positive field samples, time derivative by centered difference.
pub fn gradient_time_monitor(
    phi_a: &ScalarField,
    phi_b: &ScalarField,
    t_a: f64,
    t_b: f64,
    g_form: &HermitianField,
    ops: &SpectralOps,
    beta: f64,
) -> Result<f64> {
    if phi_a.inf() <= 0.0 || phi_b.inf() <= 0.0 {
        return Err(Error::Degenerate("monitor needs positive fields".into()));
    }
    let fa = phi_a.map(f64::ln);
    let fb = phi_b.map(f64::ln);
    let mid = fa.add(&fb)?.scale(0.5);
    let grad = grad_sq_g(&mid, g_form, ops)?;
    let dt = t_b - t_a;
    let dfdt = fb.sub(&fa)?.scale(1.0 / dt);
    let val = grad.zip_map(&dfdt, |g, d| g - beta * d)?;
    Ok(val.sup())
}
