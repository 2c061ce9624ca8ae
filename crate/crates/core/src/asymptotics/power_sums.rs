//! `S_a(n) = sum_{j=1..n} j^a` by Euler–Maclaurin.
//!
//! For integer `a` the formula terminates and is evaluated exactly in
//! rational arithmetic; otherwise
//!
//! ```text
//!     S_a(n) ~ zeta(-a) + n^(a+1)/(a+1) + n^a/2 + sum_{k>=1} B_2k/(2k)! a(a-1)...(a-2k+2) n^(a-2k+1).
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::special::{bernoulli, bernoulli_exact, zeta, MAX_BERNOULLI};
use crate::summation::CompensatedSum;

/// Value of a power sum and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSum {
    pub value: f64,
    /// Size of the first omitted Euler–Maclaurin term; zero when exact.
    pub remainder_estimate: f64,
    pub exact: bool,
}

/// `sum_{j<=n} j^a` for integer `a` via the terminating formula
/// `n^(a+1)/(a+1) + n^a/2 + sum_k B_2k/(a+1) C(a+1, 2k) n^(a+1-2k)`.
pub fn power_sum_exact(a: u32, n: u64) -> BigInt {
    if n == 0 {
        return BigInt::zero();
    }
    if a == 0 {
        return BigInt::from(n);
    }
    let nn = BigRational::from_integer(BigInt::from(n));
    let ap1 = a as usize + 1;
    let pow = |e: usize| -> BigRational { num_traits::pow(nn.clone(), e) };
    let mut total = pow(ap1) / BigRational::from_integer(BigInt::from(ap1)) + pow(a as usize) / BigRational::from_integer(BigInt::from(2));
    let mut binom = BigInt::one();
    // binom tracks C(a+1, j) as j runs up to 2k
    let mut j = 0usize;
    for k in 1..=(a as usize / 2) {
        while j < 2 * k {
            binom = binom * BigInt::from(ap1 - j) / BigInt::from(j + 1);
            j += 1;
        }
        let b = bernoulli_exact(2 * k).expect("index within Bernoulli table");
        total += b * BigRational::from_integer(binom.clone()) / BigRational::from_integer(BigInt::from(ap1)) * pow(ap1 - 2 * k);
    }
    debug_assert!(total.is_integer());
    total.to_integer()
}

/// `sum_{j<=n} j^a`, exact for integer `a` (with `a <= MAX_BERNOULLI`),
/// otherwise the Euler–Maclaurin series with `depth` Bernoulli corrections.
pub fn power_sum(a: f64, n: u64, depth: usize) -> Result<PowerSum> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(invalid(format!("a must be non-negative, got {a}")));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if a == a.floor() && (a as usize) < MAX_BERNOULLI {
        let exact = power_sum_exact(a as u32, n);
        return Ok(PowerSum {
            value: exact.to_f64().unwrap_or(f64::INFINITY),
            remainder_estimate: 0.0,
            exact: true,
        });
    }
    if 2 * (depth + 1) > MAX_BERNOULLI {
        return Err(invalid(format!("depth {depth} exceeds the Bernoulli table")));
    }
    let nf = n as f64;
    let mut acc = CompensatedSum::new();
    acc.add(nf.powf(a + 1.0) / (a + 1.0));
    acc.add(0.5 * nf.powf(a));
    acc.add(zeta(-a));
    let correction = |k: usize| {
        // B_2k / (2k)! a (a-1) ... (a-2k+2)
        let mut c = bernoulli(2 * k);
        for m in 0..(2 * k - 1) {
            c *= (a - m as f64) / (m + 2) as f64;
        }
        c * nf.powf(a - 2.0 * k as f64 + 1.0)
    };
    for k in 1..=depth {
        acc.add(correction(k));
    }
    Ok(PowerSum {
        value: acc.value(),
        remainder_estimate: correction(depth + 1).abs(),
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_small_cases() {
        assert_eq!(power_sum_exact(2, 3), BigInt::from(14));
        assert_eq!(power_sum_exact(1, 100), BigInt::from(5050));
        assert_eq!(power_sum_exact(0, 7), BigInt::from(7));
        assert_eq!(power_sum(2.0, 3, 0).unwrap().value, 14.0);
    }

    #[test]
    fn exact_matches_brute_force() {
        for a in 1..=6u32 {
            for n in 1..=60u64 {
                let brute: u128 = (1..=n as u128).map(|j| j.pow(a)).sum();
                assert_eq!(power_sum_exact(a, n), BigInt::from(brute), "a={a} n={n}");
            }
        }
    }

    #[test]
    fn fractional_exponent_against_direct_sum() {
        for &a in &[0.5, 1.5] {
            let n = 10_000u64;
            let direct: f64 = crate::summation::compensated_sum((1..=n).map(|j| (j as f64).powf(a)));
            let em = power_sum(a, n, 3).unwrap();
            assert!(!em.exact);
            assert!(((em.value - direct) / direct).abs() <= 1e-12, "a={a}");
            assert!(em.remainder_estimate < 1e-12 * direct);
        }
    }
}
