//! Elementary symmetric polynomials of small eigenvalue vectors.
//!
//! `S_k(λ) = Σ_{i1<…<ik} λ_{i1}…λ_{ik}`, built with the stable
//! Newton–Horner recurrence (expand `∏(1 + λ_i t)` one factor at a time).
//! The identity `S_{n-k}(λ) = S_k(1/λ)·∏λ` links the wedge-quotient form of
//! the operator with its reciprocal-eigenvalue form.

use crate::{Error, Result, MAX_DIM};

/// All `S_0..S_n` of `λ` at once. `S_0 = 1`.
pub fn elem_sym_all(lambda: &[f64]) -> [f64; MAX_DIM + 1] {
    debug_assert!(lambda.len() <= MAX_DIM);
    let mut e = [0.0f64; MAX_DIM + 1];
    e[0] = 1.0;
    for (i, &l) in lambda.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += l * e[k - 1];
        }
    }
    e
}

/// `S_k(λ)`; errors if `k > len(λ)`.
pub fn elem_sym(lambda: &[f64], k: usize) -> Result<f64> {
    if k > lambda.len() {
        return Err(Error::OrderOutOfRange { k, n: lambda.len() });
    }
    Ok(elem_sym_all(lambda)[k])
}

/// `S_k` of `λ` with entry `skip` removed; 0 when `k` exceeds the reduced
/// length.
pub fn elem_sym_excluding(lambda: &[f64], skip: usize, k: usize) -> f64 {
    debug_assert!(k <= MAX_DIM);
    let mut e = [0.0f64; MAX_DIM + 1];
    e[0] = 1.0;
    let mut count = 0usize;
    for (i, &l) in lambda.iter().enumerate() {
        if i == skip {
            continue;
        }
        count += 1;
        for j in (1..=count).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e[k]
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num = 1.0f64;
    let mut den = 1.0f64;
    for i in 0..k {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}

/// `S_α` of the reciprocals `1/λ_i`; requires `λ_i > 0`.
pub fn s_alpha_reciprocal(lambda: &[f64], alpha: usize) -> f64 {
    let mut mu = [0.0f64; MAX_DIM];
    for (m, &l) in mu.iter_mut().zip(lambda) {
        *m = 1.0 / l;
    }
    elem_sym_all(&mu[..lambda.len()])[alpha]
}

/// Partial derivatives `∂/∂λ_i` of `F(λ) = S_n(λ)/S_{n-α}(λ) = 1/S_α(1/λ)`,
/// together with `F` itself. Valid on the positive cone; the eigenframe
/// gradient of the operator. Returns `(F, [∂F/∂λ_i])`.
pub fn ratio_fn_gradient(lambda: &[f64], alpha: usize) -> (f64, [f64; MAX_DIM]) {
    let n = lambda.len();
    let mut mu = [0.0f64; MAX_DIM];
    for i in 0..n {
        mu[i] = 1.0 / lambda[i];
    }
    let s_alpha = elem_sym_all(&mu[..n])[alpha];
    let f = 1.0 / s_alpha;
    let mut grad = [0.0f64; MAX_DIM];
    for i in 0..n {
        // ∂F/∂λ_i = S_{α-1}(μ without i) · μ_i² / S_α(μ)².
        let s_im1 = elem_sym_excluding(&mu[..n], i, alpha - 1);
        grad[i] = s_im1 * mu[i] * mu[i] / (s_alpha * s_alpha);
    }
    (f, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(elem_sym(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert_eq!(elem_sym(&[1.0, 2.0, 3.0], 0).unwrap(), 1.0);
        assert_eq!(elem_sym(&[4.0, 5.0], 2).unwrap(), 20.0);
        assert!(elem_sym(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn excluding_matches_direct() {
        let l = [1.5, 2.5, 4.0];
        assert_eq!(elem_sym_excluding(&l, 1, 2), 1.5 * 4.0);
        assert_eq!(elem_sym_excluding(&l, 0, 0), 1.0);
        assert_eq!(elem_sym_excluding(&l, 2, 1), 4.0);
    }

    #[test]
    fn reciprocal_identity() {
        // S_{n-α}(λ) = S_α(1/λ)·∏λ.
        let l = [0.7, 1.3, 2.9];
        let prod: f64 = l.iter().product();
        for alpha in 0..=3usize {
            let lhs = elem_sym(&l, 3 - alpha).unwrap();
            let rhs = s_alpha_reciprocal(&l, alpha) * prod;
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_positive_on_cone() {
        let l = [0.9, 1.7, 3.1];
        let (f, g) = ratio_fn_gradient(&l, 2);
        assert!(f > 0.0);
        for i in 0..3 {
            assert!(g[i] > 0.0);
        }
    }

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial(2, 1), 2.0);
        assert_eq!(binomial(3, 2), 3.0);
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(3, 5), 0.0);
    }
}
