//! Independent oracle suites.
//!
//! Every nontrivial algebraic or differential kernel in the crate has a
//! second, structurally different evaluation path here: subset enumeration
//! for symmetric functions, Ryser's permanent for diagonal mixed
//! discriminants, the direct `(n-1,n-1)`-form expansion behind the reduced
//! cone inequality, characteristic-polynomial roots for the relative
//! eigenproblem, and finite differences on analytic closures for the
//! spectral calculus. `cmd verify` runs them all; the acceptance suite
//! pins their tolerances.

use crate::field::{HermitianField, ScalarField};
use crate::functionals::{j_alpha_path, straight_line_path};
use crate::grid::PeriodicGrid;
use crate::herm::{cone_condition, mixed_discriminant_of, torsion_curvature, MetricFactors};
use crate::linalg::{hermitian_eigen, CMat};
use crate::operator::{operator_derivative_from_x, ProblemData};
use crate::spectral::{DerivOrder, SpectralOps};
use crate::symfunc::elem_sym_all;
use crate::MAX_DIM;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
}

impl SuiteResult {
    fn new(name: &'static str, cases: usize, worst: f64, tol: f64) -> Self {
        Self { name, cases, worst, tol, passed: worst <= tol }
    }
}

// ---------------------------------------------------------------------------
// Finite differences on analytic closures.

/// 5-point central first derivative (4th order) with one Richardson step
/// (h and h/2), error O(h⁶).
pub fn fd_derivative<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], axis: usize, h: f64) -> f64 {
    let d4 = |hh: f64| -> f64 {
        let mut xs = x.to_vec();
        let mut eval = |off: f64| {
            xs[axis] = x[axis] + off;
            f(&xs)
        };
        (eval(-2.0 * hh) - 8.0 * eval(-hh) + 8.0 * eval(hh) - eval(2.0 * hh)) / (12.0 * hh)
    };
    (16.0 * d4(0.5 * h) - d4(h)) / 15.0
}

/// Mixed second derivative `∂_a ∂_b` by nesting the first-derivative
/// stencil.
pub fn fd_second<F: Fn(&[f64]) -> f64 + Copy>(f: F, x: &[f64], a: usize, b: usize, h: f64) -> f64 {
    let inner = move |y: &[f64]| fd_derivative(&f, y, b, h);
    fd_derivative(&inner, x, a, h)
}

/// Complex Hessian entry `∂²u/∂z^i∂z̄^j` of an analytic closure at `x`.
pub fn fd_complex_hessian<F: Fn(&[f64]) -> f64 + Copy>(
    u: F,
    x: &[f64],
    i: usize,
    j: usize,
    h: f64,
) -> Complex64 {
    let dxx = fd_second(u, x, 2 * i, 2 * j, h);
    let dyy = fd_second(u, x, 2 * i + 1, 2 * j + 1, h);
    let dyx = fd_second(u, x, 2 * i + 1, 2 * j, h);
    let dxy = fd_second(u, x, 2 * i, 2 * j + 1, h);
    Complex64::new(0.25 * (dxx + dyy), 0.25 * (dxy - dyx))
}

// ---------------------------------------------------------------------------
// Polynomial-root oracle for the relative eigenproblem.

/// Coefficients of `p(λ) = det(X − λ g)` (degree n, real for Hermitian
/// `X`, `g`), recovered from samples by solving a small Vandermonde system.
pub fn char_poly_coeffs(x: &CMat, g: &CMat) -> Vec<f64> {
    let n = x.dim();
    let m = n + 1;
    let mut a = vec![0.0f64; m * m];
    let mut rhs = vec![0.0f64; m];
    for (row, j) in (0..m).enumerate() {
        let lam = j as f64 - 0.5 * n as f64;
        let shifted = x.sub(&g.scale(lam));
        rhs[row] = shifted.det().re;
        let mut pw = 1.0;
        for k in 0..m {
            a[row * m + k] = pw;
            pw *= lam;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if a[r * m + col].abs() > a[piv * m + col].abs() {
                piv = r;
            }
        }
        if piv != col {
            for k in 0..m {
                a.swap(col * m + k, piv * m + k);
            }
            rhs.swap(col, piv);
        }
        let d = a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] / d;
            for k in col..m {
                a[r * m + k] -= f * a[col * m + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut c = vec![0.0f64; m];
    for row in (0..m).rev() {
        let mut s = rhs[row];
        for k in row + 1..m {
            s -= a[row * m + k] * c[k];
        }
        c[row] = s / a[row * m + row];
    }
    c
}

/// All roots of `Σ c_k z^k` by Durand–Kerner, deterministic start.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let monic: Vec<Complex64> =
        coeffs.iter().map(|&c| Complex64::new(c / lead, 0.0)).collect();
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            acc = acc * z + c;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| seed.powu(k as u32 + 1))
        .collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Ascending real parts of the roots of `det(X − λg)`.
pub fn rel_eigen_oracle(x: &CMat, g: &CMat) -> Vec<f64> {
    let coeffs = char_poly_coeffs(x, g);
    let mut roots: Vec<f64> = poly_roots(&coeffs).iter().map(|z| z.re).collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

// ---------------------------------------------------------------------------
// Random inputs.

fn rand_unit(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-1.0..1.0)
}

fn rand_spd(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    // L Lᴴ with a unit-diagonal-ish lower factor keeps conditioning tame.
    let mut l = CMat::zero(n);
    for i in 0..n {
        l.set(i, i, Complex64::new(rng.gen_range(0.5..1.5), 0.0));
        for j in 0..i {
            l.set(i, j, Complex64::new(0.4 * rand_unit(rng), 0.4 * rand_unit(rng)));
        }
    }
    l.mul(&l.adjoint()).hermitian_part()
}

/// `Σ_{|S|=k} ∏_{i∈S} λ_i` by explicit subset enumeration (oracle).
fn subset_sum_oracle(lambda: &[f64], k: usize) -> f64 {
    let n = lambda.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            let mut prod = 1.0;
            for (i, &l) in lambda.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    prod *= l;
                }
            }
            total += prod;
        }
    }
    total
}

/// Permanent by Ryser's inclusion–exclusion formula (oracle).
fn permanent_ryser(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let mut prod = 1.0;
        for row in a.iter().take(n) {
            let mut s = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    s += v;
                }
            }
            prod *= s;
        }
        let sign = if (n as u32 - mask.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * prod;
    }
    total
}

// ---------------------------------------------------------------------------
// Suites.

/// `S_{n-α}(λ) = S_α(1/λ)·∏λ` plus the subset-enumeration oracle for
/// `S_k` itself.
pub fn suite_s_identity(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(2..=MAX_DIM);
        let mut lam = [0.0f64; MAX_DIM];
        for l in lam.iter_mut().take(n) {
            *l = rng.gen_range(0.1..10.0);
        }
        let lam = &lam[..n];
        let e = elem_sym_all(lam);
        let prod: f64 = lam.iter().product();
        let mut mu = [0.0f64; MAX_DIM];
        for (m, &l) in mu.iter_mut().zip(lam) {
            *m = 1.0 / l;
        }
        let emu = elem_sym_all(&mu[..n]);
        for alpha in 0..=n {
            let lhs = e[n - alpha];
            let rhs = emu[alpha] * prod;
            worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
            // Recurrence vs subset enumeration.
            let direct = subset_sum_oracle(lam, alpha);
            worst = worst.max((e[alpha] - direct).abs() / direct.abs().max(1.0));
        }
    }
    SuiteResult::new("s_identity", cases, worst, 1e-12)
}

/// Mixed discriminant of simultaneously diagonal factors vs Ryser's
/// permanent.
pub fn suite_mixed_discriminant(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x52);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(2..=3usize);
        let diags: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(0.1..3.0)).collect())
            .collect();
        let mats: Vec<CMat> = diags.iter().map(|d| CMat::diag(d)).collect();
        let d = mixed_discriminant_of(&mats);
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        let oracle = permanent_ryser(&diags) / factorial;
        worst = worst.max((d - oracle).abs() / oracle.abs().max(1.0));
    }
    SuiteResult::new("mixed_discriminant_diagonal", cases, worst, 1e-12)
}

/// The per-direction reduced cone inequality against the brute-force
/// expansion of `n χ'^{n-1} − (n-α) ψ χ'^{n-α-1} ∧ ω^α` as an
/// `(n-1,n-1)`-form on diagonal inputs, `n ∈ {2,3}`, `α ∈ 1..n`.
pub fn suite_cone_reduction(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x53);
    let mut worst: f64 = 0.0;
    let mut done = 0usize;
    while done < cases {
        let n = rng.gen_range(2..=3usize);
        let alpha = rng.gen_range(1..n.max(2));
        let psi_val = rng.gen_range(0.2..3.0);
        let mut lam = vec![0.0; n];
        for l in lam.iter_mut() {
            *l = rng.gen_range(0.2..4.0);
        }

        // Reduced route through the production code on a one-point grid.
        let grid = PeriodicGrid::new(n, &vec![1; 2 * n], &vec![1.0; 2 * n]).unwrap();
        let omega = HermitianField::constant(&grid, &CMat::identity(n)).unwrap();
        let metric = MetricFactors::new(&omega).unwrap();
        let chi = HermitianField::constant(&grid, &CMat::diag(&lam)).unwrap();
        let psi = ScalarField::constant(&grid, psi_val);
        let report = cone_condition(&chi, &metric, &psi, alpha).unwrap();

        // Direct route: per-direction coefficients of the (n-1,n-1)-form.
        let mut direct_margin = f64::INFINITY;
        let nf: f64 = (1..=n).map(|k| k as f64).product();
        for i in 0..n {
            let rest: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| lam[j]).collect();
            let prod_rest: f64 = rest.iter().product();
            let lhs = n as f64 * factorial(n - 1) * prod_rest;
            let rhs = (n - alpha) as f64
                * psi_val
                * factorial(n - alpha - 1)
                * factorial(alpha)
                * subset_sum_oracle(&rest, n - alpha - 1);
            direct_margin = direct_margin.min((lhs - rhs) / (nf * prod_rest));
        }
        worst = worst.max((report.margin - direct_margin).abs());
        if report.satisfied != (direct_margin > 0.0 && lam.iter().all(|&l| l > 0.0)) {
            worst = f64::INFINITY;
        }
        done += 1;
    }
    SuiteResult::new("cone_reduction_vs_wedge", cases, worst, 1e-10)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Relative eigenvalues by congruence + Jacobi vs characteristic
/// polynomial roots, on pencils with known spectra.
pub fn suite_eigen_oracle(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x54);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(2..=3usize);
        let g = rand_spd(&mut rng, n);
        // X = L diag(λ*) Lᴴ with well-separated λ* makes the relative
        // spectrum exactly λ*.
        let l = g.cholesky().unwrap();
        let mut lam_true = vec![0.0; n];
        let mut v = rng.gen_range(-2.0..0.0);
        for t in lam_true.iter_mut() {
            *t = v;
            v += rng.gen_range(0.15..1.5);
        }
        let x = CMat::from_eigen(&l, &lam_true).hermitian_part();

        // Implementation route.
        let reduced = l.congruence_reduce(&x);
        let (vals, _) = hermitian_eigen(&reduced, false);

        // Oracle route.
        let roots = rel_eigen_oracle(&x, &g);
        for i in 0..n {
            worst = worst.max((vals[i] - roots[i]).abs());
            worst = worst.max((vals[i] - lam_true[i]).abs().min(1.0) * 1e-2);
        }
    }
    SuiteResult::new("eigenvalue_oracle", cases, worst, 1e-10)
}

/// Spectral first/second derivatives vs finite differences of the analytic
/// mode sum, on random band-limited fields.
pub fn suite_spectral_derivative(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    let grid = PeriodicGrid::new(2, &[16, 1, 16, 1], &[1.0, 1.0, 2.0, 1.0]).unwrap();
    let ops = SpectralOps::new(&grid);
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for _ in 0..4 {
        let modes: Vec<(f64, f64, f64, f64)> = (0..5)
            .map(|_| {
                (
                    rng.gen_range(-3i32..=3) as f64,
                    rng.gen_range(-3i32..=3) as f64,
                    rand_unit(&mut rng),
                    rng.gen_range(0.0..TAU),
                )
            })
            .collect();
        let periods = grid.periods().to_vec();
        let f = move |x: &[f64]| -> f64 {
            modes
                .iter()
                .map(|&(k0, k2, amp, ph)| {
                    (TAU * (k0 * x[0] / periods[0] + k2 * x[2] / periods[2]) + ph).cos() * amp
                })
                .sum()
        };
        let field = ScalarField::from_fn(&grid, &f);
        for axis in [0usize, 2] {
            let d = ops.derivative(&field, axis, DerivOrder::First).unwrap();
            for p in (0..grid.total_points()).step_by(7) {
                let x = grid.position_of(p);
                let fd = fd_derivative(&f, &x, axis, 1e-2);
                worst = worst.max((d.values()[p] - fd).abs());
                cases += 1;
            }
        }
    }
    SuiteResult::new("spectral_derivative_fd", cases, worst, 1e-6)
}

/// Spectral complex Hessian vs finite differences, full 4-axis grid.
pub fn suite_hessian_fd(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x56);
    let grid = PeriodicGrid::new(2, &[8, 8, 8, 8], &[1.0; 4]).unwrap();
    let ops = SpectralOps::new(&grid);
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..6)
        .map(|_| {
            (
                (0..4).map(|_| rng.gen_range(-2i32..=2) as f64).collect(),
                0.5 * rand_unit(&mut rng),
                rng.gen_range(0.0..TAU),
            )
        })
        .collect();
    let u = move |x: &[f64]| -> f64 {
        modes
            .iter()
            .map(|(k, amp, ph)| {
                (TAU * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + k[3] * x[3]) + ph).cos() * amp
            })
            .sum()
    };
    let field = ScalarField::from_fn(&grid, &u);
    let hess = ops.hessian(&field).unwrap();
    for p in (0..grid.total_points()).step_by(97) {
        let x = grid.position_of(p);
        let m = hess.at(p);
        for i in 0..2 {
            for j in 0..2 {
                let fd = fd_complex_hessian(&u, &x, i, j, 5e-3);
                worst = worst.max((m.get(i, j) - fd).norm());
                cases += 1;
            }
        }
    }
    SuiteResult::new("hessian_fd", cases, worst, 1e-6)
}

/// Eigenframe gradient `[F^{ij̄}]` vs central finite differences of
/// `F = S_n/S_{n-α}` under Hermitian perturbations of `X`.
pub fn suite_linearized_fd(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x57);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(2..=3usize);
        let alpha = rng.gen_range(1..=n - 1);
        let g = rand_spd(&mut rng, n);
        let l = g.cholesky().unwrap();
        let mut lam = vec![0.0; n];
        for t in lam.iter_mut() {
            *t = rng.gen_range(0.4..3.0);
        }
        let x = CMat::from_eigen(&l, &lam).hermitian_part();

        // Production gradient on a one-point grid.
        let grid = PeriodicGrid::new(n, &vec![1; 2 * n], &vec![1.0; 2 * n]).unwrap();
        let omega_f = HermitianField::constant(&grid, &g).unwrap();
        let chi_f = HermitianField::constant(&grid, &x).unwrap();
        let psi = ScalarField::constant(&grid, 1.0);
        let data = ProblemData::new(omega_f, chi_f.clone(), psi, alpha).unwrap();
        let p_form = operator_derivative_from_x(&data, &chi_f).unwrap().at(0);

        // F value route shared; the *gradient* is what finite differences
        // check: dF = tr(P·E) for Hermitian directions E.
        let f_of = |m: &CMat| -> f64 {
            let red = l.congruence_reduce(m);
            let (vals, _) = hermitian_eigen(&red, false);
            let e = elem_sym_all(&vals[..n]);
            e[n] / e[n - alpha]
        };
        let h = 1e-5;
        let mut dirs: Vec<CMat> = Vec::new();
        for i in 0..n {
            let mut e = CMat::zero(n);
            e.set(i, i, Complex64::new(1.0, 0.0));
            dirs.push(e);
        }
        for i in 0..n {
            for j in i + 1..n {
                let mut er = CMat::zero(n);
                er.set(i, j, Complex64::new(1.0, 0.0));
                er.set(j, i, Complex64::new(1.0, 0.0));
                dirs.push(er);
                let mut ei = CMat::zero(n);
                ei.set(i, j, Complex64::new(0.0, 1.0));
                ei.set(j, i, Complex64::new(0.0, -1.0));
                dirs.push(ei);
            }
        }
        for e in dirs {
            let fd = {
                let f1 = f_of(&x.add(&e.scale(h)));
                let f2 = f_of(&x.sub(&e.scale(h)));
                let d1 = (f1 - f2) / (2.0 * h);
                let f1h = f_of(&x.add(&e.scale(0.5 * h)));
                let f2h = f_of(&x.sub(&e.scale(0.5 * h)));
                let d2 = (f1h - f2h) / h;
                (4.0 * d2 - d1) / 3.0
            };
            let analytic = p_form.mul(&e).trace().re;
            worst = worst.max((fd - analytic).abs());
        }
    }
    SuiteResult::new("linearized_metric_fd", cases, worst, 1e-6)
}

/// Quadrature vs a 4× finer grid on analytic (non-band-limited) data.
pub fn suite_integrate_refinement(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x58);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let a = rng.gen_range(0.1..0.4);
        let b = rng.gen_range(0.05..0.3);
        let f = move |x: &[f64]| (a * (TAU * x[0]).cos()).exp() * (1.0 + b * (TAU * x[2]).sin());
        let vol = move |x: &[f64]| 2.0 * (1.0 + 0.1 * (TAU * x[0]).sin());
        let coarse = integral_on(16, &f, &vol);
        let fine = integral_on(64, &f, &vol);
        worst = worst.max((coarse - fine).abs() / fine.abs());
    }
    SuiteResult::new("integrate_refinement", 3, worst, 1e-8)
}

fn integral_on(
    nx: usize,
    f: &(impl Fn(&[f64]) -> f64 + Sync),
    vol: &(impl Fn(&[f64]) -> f64 + Sync),
) -> f64 {
    let grid = PeriodicGrid::new(2, &[nx, 1, nx, 1], &[1.0; 4]).unwrap();
    let ff = ScalarField::from_fn(&grid, f);
    let vv = ScalarField::from_fn(&grid, vol);
    crate::field::integrate(&ff, &vv).unwrap()
}

/// J-functional path independence: straight line vs a monotone cubic
/// reparametrization.
pub fn suite_path_independence(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x59);
    let grid = PeriodicGrid::new(2, &[8, 1, 8, 1], &[1.0; 4]).unwrap();
    let omega = HermitianField::constant(&grid, &CMat::identity(2)).unwrap();
    let chi = omega.scale(2.0);
    let psi = ScalarField::constant(&grid, 1.0);
    let data = ProblemData::new(omega, chi, psi, 1).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..2 {
        let a0 = 0.05 * rand_unit(&mut rng);
        let a1 = 0.04 * rand_unit(&mut rng);
        let u = ScalarField::from_fn(&grid, move |x| {
            a0 * (TAU * x[0]).sin() + a1 * (TAU * (x[0] + x[2])).cos()
        });
        let straight = j_alpha_path(&straight_line_path(&u, 33), &data).unwrap();
        let m = 33;
        let path: Vec<(f64, ScalarField)> = (0..m)
            .map(|k| {
                let s = k as f64 / (m - 1) as f64;
                let r = s * s * (3.0 - 2.0 * s);
                (s, u.scale(r))
            })
            .collect();
        let repar = j_alpha_path(&path, &data).unwrap();
        worst = worst.max((straight - repar).abs() / (1.0 + straight.abs()));
    }
    SuiteResult::new("j_path_independence", 2, worst, 1e-7)
}

/// Torsion/curvature formulas vs finite differences of the same formulas
/// on a conformal metric.
pub fn suite_torsion_fd(_seed: u64) -> SuiteResult {
    let grid = PeriodicGrid::new(2, &[12, 1, 12, 1], &[1.0; 4]).unwrap();
    let ops = SpectralOps::new(&grid);
    let eps = 0.08;
    let gfun = move |x: &[f64]| -> CMat {
        let s = (eps * (TAU * x[0]).cos()).exp();
        let mut m = CMat::identity(2).scale(s);
        m.set(0, 1, Complex64::new(0.05 * (TAU * x[2]).sin(), 0.0));
        m.set(1, 0, Complex64::new(0.05 * (TAU * x[2]).sin(), 0.0));
        m
    };
    let g = HermitianField::from_fn(&grid, gfun).unwrap();
    let tc = torsion_curvature(&g, &ops).unwrap();

    // FD evaluation of the same formulas at a few points.
    let h = 1e-3;
    let dz = |f: &dyn Fn(&[f64]) -> Complex64, x: &[f64], i: usize| -> Complex64 {
        let re = |y: &[f64]| f(y).re;
        let im = |y: &[f64]| f(y).im;
        let dre_x = fd_derivative(&re, x, 2 * i, h);
        let dre_y = fd_derivative(&re, x, 2 * i + 1, h);
        let dim_x = fd_derivative(&im, x, 2 * i, h);
        let dim_y = fd_derivative(&im, x, 2 * i + 1, h);
        // ∂_i = ½(∂x − i∂y) on complex values.
        0.5 * Complex64::new(dre_x + dim_y, dim_x - dre_y)
    };
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for p in (0..grid.total_points()).step_by(13) {
        let x = grid.position_of(p);
        let gm = gfun(&x);
        let gi = gm.hermitian_inverse().unwrap();
        let up = |k: usize, l: usize| gi.get(l, k);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut t = Complex64::default();
                    for l in 0..2 {
                        let entry_jl = move |y: &[f64]| gfun(y).get(j, l);
                        let entry_il = move |y: &[f64]| gfun(y).get(i, l);
                        t += up(k, l) * (dz(&entry_jl, &x, i) - dz(&entry_il, &x, j));
                    }
                    worst = worst.max((t - tc.torsion(p, k, i, j)).norm());
                    cases += 1;
                }
            }
        }
    }
    SuiteResult::new("torsion_fd", cases, worst, 1e-6)
}

/// Reduced vs wedge evaluation of the operator on random admissible data.
pub fn suite_operator_routes(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a);
    let grid = PeriodicGrid::new(2, &[8, 1, 8, 1], &[1.0; 4]).unwrap();
    let omega = HermitianField::constant(&grid, &CMat::identity(2)).unwrap();
    let chi = omega.scale(2.0);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let psi_c = rng.gen_range(0.5..2.0);
        let psi = ScalarField::constant(&grid, psi_c);
        let data = ProblemData::new(omega.clone(), chi.clone(), psi, 1).unwrap();
        let a0 = 0.06 * rand_unit(&mut rng);
        let a1 = 0.05 * rand_unit(&mut rng);
        let u = ScalarField::from_fn(&grid, move |x| {
            a0 * (TAU * x[0]).sin() + a1 * (TAU * x[2]).cos()
        });
        let eig_route = crate::operator::operator_value(&data, &u).unwrap().f;
        let wedge_route = crate::operator::operator_value_wedge(&data, &u).unwrap();
        worst = worst.max(eig_route.sub(&wedge_route).unwrap().max_abs());
    }
    SuiteResult::new("operator_eigen_vs_wedge", 3, worst, 1e-10)
}

/// Run every suite with the given seed. `algebra_cases` controls the
/// random-instance count of the four pointwise-algebra suites.
pub fn run_all(seed: u64, algebra_cases: usize) -> Vec<SuiteResult> {
    vec![
        suite_s_identity(seed, algebra_cases),
        suite_mixed_discriminant(seed, algebra_cases),
        suite_cone_reduction(seed, algebra_cases),
        suite_eigen_oracle(seed, algebra_cases),
        suite_spectral_derivative(seed),
        suite_hessian_fd(seed),
        suite_linearized_fd(seed, algebra_cases.min(2000)),
        suite_integrate_refinement(seed),
        suite_path_independence(seed),
        suite_torsion_fd(seed),
        suite_operator_routes(seed),
    ]
}
