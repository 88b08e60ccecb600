//! Deterministic reductions and parallel helpers.
//!
//! Every reduction here uses a fixed chunk decomposition with sequential
//! combination of the per-chunk partials, so results are bit-identical no
//! matter how many rayon threads run the chunks.

use rayon::prelude::*;

/// Chunk length for parallel reductions. Fixed so the summation tree does
/// not depend on the thread count.
pub const REDUCE_CHUNK: usize = 4096;

/// Neumaier-compensated sum of a slice.
pub fn sum_compensated(values: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in values {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Deterministic parallel sum: fixed chunks, compensated within each chunk,
/// compensated again over the ordered partials.
pub fn par_sum(values: &[f64]) -> f64 {
    if values.len() <= REDUCE_CHUNK {
        return sum_compensated(values);
    }
    let partials: Vec<f64> = values
        .par_chunks(REDUCE_CHUNK)
        .map(sum_compensated)
        .collect();
    sum_compensated(&partials)
}

/// Deterministic parallel sum of `f(i)` over `0..len`.
pub fn par_sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(len);
            let mut s = 0.0;
            let mut comp = 0.0;
            for i in lo..hi {
                let x = f(i);
                let t = s + x;
                if s.abs() >= x.abs() {
                    comp += (s - t) + x;
                } else {
                    comp += (x - t) + s;
                }
                s = t;
            }
            s + comp
        })
        .collect();
    sum_compensated(&partials)
}

/// Minimum and maximum of a slice. `max`/`min` are associative, so a plain
/// parallel reduce would already be deterministic; chunking keeps the code
/// uniform with the sums.
pub fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .par_chunks(REDUCE_CHUNK)
        .map(|c| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &x in c {
                lo = lo.min(x);
                hi = hi.max(x);
            }
            (lo, hi)
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        )
}

/// Index of the minimum value (first occurrence) together with the value.
pub fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (i, &x) in values.iter().enumerate() {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}

/// Index of the maximum value (first occurrence) together with the value.
pub fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &x) in values.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// First non-finite entry, if any.
pub fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|x| !x.is_finite())
}

/// Ordinary least squares for `y ≈ a + b x`. Returns `(a, b, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return (my, 0.0, if syy == 0.0 { 1.0 } else { 0.0 });
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        // 1 + many tiny values that individually round away.
        let mut v = vec![1.0];
        v.extend(std::iter::repeat(1e-18).take(100_000));
        let s = par_sum(&v);
        assert!((s - (1.0 + 1e-13)).abs() < 1e-15);
    }

    #[test]
    fn par_sum_matches_sequential() {
        let v: Vec<f64> = (0..30_000).map(|i| ((i * 37) % 101) as f64 * 0.25).collect();
        assert_eq!(par_sum(&v), sum_compensated(&v));
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.7 * x).collect();
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b + 0.7).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
