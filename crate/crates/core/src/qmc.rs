//! Low-discrepancy (Halton) point sets.

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Van der Corput radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Point `index` of the `dim`-dimensional Halton sequence, strictly inside the unit cube for
/// `index >= 1`.
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
    PRIMES[..dim].iter().map(|&p| radical_inverse(index, p)).collect()
}

/// `n` consecutive Halton points starting at `start` (use `start >= 1` to avoid the origin).
pub fn halton(n: usize, dim: usize, start: u64) -> Vec<Vec<f64>> {
    (0..n as u64).map(|i| halton_point(start + i, dim)).collect()
}

/// Standard normal quantile function.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
