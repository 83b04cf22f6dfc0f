//! Exact binomial coefficients with log2 conversion.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Exact `C(n, k)`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `log2(x)`, `-inf` for zero.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        let v: u64 = x.iter_u64_digits().next().unwrap_or(0);
        return (v as f64).log2();
    }
    let shift = bits - 64;
    let top: u64 = (x >> shift).iter_u64_digits().next().unwrap_or(0);
    (top as f64).log2() + shift as f64
}

/// `log2 C(n, k)` computed from the exact integer.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    log2_big(&binomial(n, k))
}

/// `log2(2^a + 2^b)` without leaving the log domain.
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(5, 2), BigUint::from(10u32));
        assert_eq!(binomial(5, 0), BigUint::one());
        assert_eq!(binomial(5, 6), BigUint::zero());
        assert_eq!(log2_binomial(4801, 0), 0.0);
        assert_eq!(log2_binomial(4801, 4801), 0.0);
        assert!((log2_binomial(4801, 1) - 4801f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn large_binomial_matches_lgamma_sum() {
        // log2 C(9602, 90) via a sum of logs, independent of the bigint path.
        let direct: f64 = (0..90u64)
            .map(|i| ((9602 - i) as f64).log2() - ((i + 1) as f64).log2())
            .sum();
        assert!((log2_binomial(9602, 90) - direct).abs() < 1e-9);
    }

    #[test]
    fn log_add() {
        assert!((log2_add(3.0, 3.0) - 4.0).abs() < 1e-12);
        assert_eq!(log2_add(f64::NEG_INFINITY, 2.5), 2.5);
    }
}
