//! Real-axis special functions: Gamma, Riemann zeta, Bernoulli and harmonic
//! numbers, and incomplete Gamma functions.
//!
//! Reflection formulas use an exact `sin(pi x)` so that poles and trivial
//! zeros are hit exactly.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest index held in the Bernoulli table.
pub const MAX_BERNOULLI: usize = 60;

/// Terms in the Borwein acceleration of the eta series.
const BORWEIN_TERMS: usize = 50;

/// `sin(pi x)`, exactly zero at the integers.
pub fn sin_pi(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    // reduce to [-1, 1]; sin(pi x) has period 2
    let mut r = x % 2.0;
    if r > 1.0 {
        r -= 2.0;
    } else if r < -1.0 {
        r += 2.0;
    }
    if r == 0.0 || r.abs() == 1.0 {
        return 0.0 * x.signum();
    }
    // fold onto [-1/2, 1/2] using sin(pi (1 - r)) = sin(pi r)
    if r > 0.5 {
        r = 1.0 - r;
    } else if r < -0.5 {
        r = -1.0 - r;
    }
    (PI * r).sin()
}

fn is_nonpositive_integer(s: f64) -> bool {
    s <= 0.0 && s == s.floor()
}

/// Lanczos coefficients, `g = 7`, `n = 9`.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation, accurate near `[1, 2]`.
fn gamma_lanczos(s: f64) -> f64 {
    let x = s - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Stirling series for `ln Gamma(s)`, `s >= 10`.
fn ln_gamma_stirling(s: f64) -> f64 {
    let inv = 1.0 / s;
    let inv2 = inv * inv;
    let mut corr = 0.0;
    let mut pow = inv;
    for k in 1..=8 {
        let two_k = 2 * k;
        corr += bernoulli(two_k) / ((two_k * (two_k - 1)) as f64) * pow;
        pow *= inv2;
    }
    (s - 0.5) * s.ln() - s + 0.5 * (2.0 * PI).ln() + corr
}

/// `Gamma(s)`; NaN at the poles `0, -1, -2, ...`.
pub fn gamma(s: f64) -> f64 {
    if s.is_nan() || is_nonpositive_integer(s) {
        return f64::NAN;
    }
    if s < 0.5 {
        return PI / (sin_pi(s) * gamma(1.0 - s));
    }
    if s < 1.0 {
        return gamma_lanczos(s + 1.0) / s;
    }
    if s == s.floor() && s <= 171.0 {
        return (2..s as u32).map(f64::from).product();
    }
    if s <= 40.0 {
        // Gamma(s) = (s-1)(s-2)...(s-m) Gamma(s-m) with s-m in [1, 2)
        let mut x = s;
        let mut prod = 1.0;
        while x >= 2.0 {
            x -= 1.0;
            prod *= x;
        }
        return prod * gamma_lanczos(x);
    }
    if s > 171.7 {
        return f64::INFINITY;
    }
    ln_gamma_stirling(s).exp()
}

/// `ln |Gamma(s)|`; `+inf` at the poles.
pub fn ln_gamma(s: f64) -> f64 {
    if is_nonpositive_integer(s) {
        return f64::INFINITY;
    }
    if s < 0.5 {
        return PI.ln() - sin_pi(s).abs().ln() - ln_gamma(1.0 - s);
    }
    if s < 10.0 {
        return gamma(s).ln();
    }
    ln_gamma_stirling(s)
}

/// Riemann zeta on the real line; `+inf` at `s = 1`.
pub fn zeta(s: f64) -> f64 {
    if s.is_nan() {
        return f64::NAN;
    }
    if s == 1.0 {
        return f64::INFINITY;
    }
    if s >= 0.0 {
        return zeta_borwein(s);
    }
    if s == s.floor() {
        // zeta(-n) = -B_{n+1} / (n + 1)
        let n = (-s) as usize;
        if n < MAX_BERNOULLI {
            return -bernoulli(n + 1) / (n as f64 + 1.0);
        }
        if n.is_multiple_of(2) {
            return 0.0;
        }
    }
    // zeta(s) = 2^s pi^(s-1) sin(pi s / 2) Gamma(1 - s) zeta(1 - s)
    let one_minus_s = 1.0 - s;
    let trig = sin_pi(0.5 * s);
    if trig == 0.0 {
        return 0.0;
    }
    let z = zeta_borwein(one_minus_s);
    if one_minus_s < 170.0 {
        2f64.powf(s) * PI.powf(s - 1.0) * trig * gamma(one_minus_s) * z
    } else {
        let log_mag = s * LN_2 + (s - 1.0) * PI.ln() + ln_gamma(one_minus_s);
        trig * z * log_mag.exp()
    }
}

/// `zeta(s) = eta(s) / (1 - 2^(1-s))` for `s >= 0`, `s != 1`.
fn zeta_borwein(s: f64) -> f64 {
    static D: OnceLock<Vec<f64>> = OnceLock::new();
    let d = D.get_or_init(|| {
        let n = BORWEIN_TERMS;
        let nf = n as f64;
        let mut d = Vec::with_capacity(n + 1);
        let mut term = 1.0;
        let mut acc = term;
        d.push(acc);
        for i in 1..=n {
            let fi = i as f64;
            term *= 4.0 * (nf + fi - 1.0) * (nf - fi + 1.0) / ((2.0 * fi) * (2.0 * fi - 1.0));
            acc += term;
            d.push(acc);
        }
        d
    });
    let n = BORWEIN_TERMS;
    let dn = d[n];
    let mut eta = 0.0;
    for k in (0..n).rev() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        eta += sign * (d[k] - dn) / ((k + 1) as f64).powf(s);
    }
    eta = -eta / dn;
    let denom = -((1.0 - s) * LN_2).exp_m1();
    eta / denom
}

fn bernoulli_table() -> &'static [BigRational] {
    static TABLE: OnceLock<Vec<BigRational>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut b: Vec<BigRational> = Vec::with_capacity(MAX_BERNOULLI + 1);
        b.push(BigRational::one());
        for m in 1..=MAX_BERNOULLI {
            // sum_{k<=m} C(m+1, k) B_k = 0
            let mut acc = BigRational::zero();
            let mut binom = BigInt::one();
            for (k, bk) in b.iter().enumerate() {
                acc += BigRational::from_integer(binom.clone()) * bk;
                binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
            }
            b.push(-acc / BigRational::from_integer(BigInt::from(m + 1)));
        }
        b
    })
}

/// `B_n` as an exact rational (`B_1 = -1/2`), for `n <= MAX_BERNOULLI`.
pub fn bernoulli_exact(n: usize) -> Option<BigRational> {
    bernoulli_table().get(n).cloned()
}

/// `B_n` rounded to `f64`; panics past `MAX_BERNOULLI`.
pub fn bernoulli(n: usize) -> f64 {
    bernoulli_table()[n].to_f64().expect("Bernoulli numbers are finite")
}

/// `H_k = 1 + 1/2 + ... + 1/k`.
pub fn harmonic(k: usize) -> f64 {
    crate::summation::compensated_sum((1..=k).map(|j| 1.0 / j as f64))
}

/// Lower incomplete Gamma `gamma(s, x)`, `s > 0`, `x >= 0`.
pub fn lower_incomplete_gamma(s: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x < s + 1.0 {
        (-x + s * x.ln()).exp() * scaled_lower_gamma(s, x)
    } else {
        gamma(s) - upper_incomplete_gamma(s, x)
    }
}

/// Upper incomplete Gamma `Gamma(s, x)`, `s > 0`, `x >= 0`.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> f64 {
    if x >= s + 1.0 {
        (-x + s * x.ln()).exp() * upper_continued_fraction(s, x)
    } else {
        gamma(s) - lower_incomplete_gamma(s, x)
    }
}

/// `ln Gamma(s, x)`, usable where `Gamma(s, x)` itself overflows.
pub fn ln_upper_incomplete_gamma(s: f64, x: f64) -> f64 {
    if x >= s + 1.0 {
        -x + s * x.ln() + upper_continued_fraction(s, x).ln()
    } else {
        // Gamma(s, x) = Gamma(s) (1 - P(s, x))
        let ln_p = -x + s * x.ln() + scaled_lower_gamma(s, x).ln() - ln_gamma(s);
        ln_gamma(s) + (-ln_p.exp()).ln_1p()
    }
}

/// `e^x x^(-s) gamma(s, x) = sum_{n>=0} x^n / (s (s+1) ... (s+n))`, which
/// stays of moderate size when `gamma(s, x)` overflows.
pub fn scaled_lower_gamma(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut acc = crate::summation::CompensatedSum::new();
    acc.add(term);
    let mut n = 1.0;
    loop {
        term *= x / (s + n);
        acc.add(term);
        // ratio x / (s + n) < 1 past n > x - s, after which the tail is geometric
        let ratio = x / (s + n + 1.0);
        if ratio < 1.0 && term * ratio / (1.0 - ratio) <= f64::EPSILON * acc.value() {
            break;
        }
        n += 1.0;
    }
    acc.value()
}

/// Continued fraction for `e^x x^(-s) Gamma(s, x)` (modified Lentz).
fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let fi = i as f64;
        let an = -fi * (fi - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() <= f64::EPSILON {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zeta_standard_values() {
        assert!(rel(zeta(-1.0), -1.0 / 12.0) <= 1e-14);
        assert!(rel(zeta(0.0), -0.5) <= 1e-14);
        assert!(rel(zeta(2.0), PI * PI / 6.0) <= 1e-14);
        assert!(rel(zeta(4.0), PI.powi(4) / 90.0) <= 1e-14);
        assert!(rel(zeta(0.5), -1.460_354_508_809_586_8) <= 1e-13);
        assert!(rel(zeta(-0.5), -0.207_886_224_977_354_57) <= 1e-13);
        assert!(rel(zeta(-2.5), 0.008_516_928_777_850_331) <= 1e-12);
        assert_eq!(zeta(-2.0), 0.0);
        assert_eq!(zeta(-14.0), 0.0);
        assert!(zeta(1.0).is_infinite());
        // close to the pole: zeta(s) ~ 1/(s-1) + gamma
        let s = 1.0 + 1e-8;
        assert!(rel(zeta(s), 1.0 / (s - 1.0) + EULER_GAMMA) <= 1e-12);
    }

    #[test]
    fn zeta_functional_equation_matches_bernoulli_branch() {
        for n in [1usize, 3, 5, 7, 11] {
            let s = -(n as f64);
            let one_minus_s = 1.0 - s;
            let fe = 2f64.powf(s) * PI.powf(s - 1.0) * sin_pi(0.5 * s) * gamma(one_minus_s) * zeta(one_minus_s);
            assert!(rel(zeta(s), fe) <= 1e-13, "n={n}");
        }
    }

    #[test]
    fn gamma_recurrence_and_reflection() {
        let mut s = 0.5;
        while s <= 20.0 {
            assert!(rel(gamma(s + 1.0), s * gamma(s)) <= 1e-13, "s={s}");
            s += 0.37;
        }
        assert!(rel(gamma(-0.5), -2.0 * PI.sqrt()) <= 1e-14);
        assert!(rel(gamma(0.5), PI.sqrt()) <= 1e-14);
        assert!(gamma(0.0).is_nan() && gamma(-3.0).is_nan());
        assert!(rel(ln_gamma(-2.5), gamma(-2.5).abs().ln()) <= 1e-13);
        assert!(rel(ln_gamma(100.0), 359.134_205_369_575_4) <= 1e-14);
        assert!(rel(gamma(50.5), 4.290_462_912_351_959e63) <= 1e-13);
        assert_eq!(gamma(5.0), 24.0);
    }

    #[test]
    fn sin_pi_is_exact_on_lattice() {
        for k in -6..=6 {
            assert_eq!(sin_pi(k as f64), 0.0);
        }
        assert_eq!(sin_pi(0.5), 1.0);
        assert_eq!(sin_pi(-1.5), 1.0);
        assert!((sin_pi(1.0 / 6.0) - 0.5).abs() <= 1e-16);
    }

    #[test]
    fn bernoulli_table() {
        assert_eq!(bernoulli(0), 1.0);
        assert_eq!(bernoulli(1), -0.5);
        assert!(rel(bernoulli(2), 1.0 / 6.0) <= 1e-16);
        assert!(rel(bernoulli(4), -1.0 / 30.0) <= 1e-16);
        assert!(rel(bernoulli(6), 1.0 / 42.0) <= 1e-16);
        assert_eq!(bernoulli(7), 0.0);
        let b60 = bernoulli_exact(60).unwrap();
        assert_eq!(b60.denom(), &BigInt::from(56_786_730u64));
        assert!(bernoulli_exact(61).is_none());
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert!(rel(harmonic(4), 25.0 / 12.0) <= 1e-16);
    }

    #[test]
    fn incomplete_gamma_consistency() {
        for &(s, x) in &[(3.0, 1.0), (7.0, 5.0), (2.5, 10.0), (22.0, 20.0), (4.0, 30.0)] {
            let total = lower_incomplete_gamma(s, x) + upper_incomplete_gamma(s, x);
            assert!(rel(total, gamma(s)) <= 1e-13, "s={s} x={x}");
            assert!(rel(ln_upper_incomplete_gamma(s, x), upper_incomplete_gamma(s, x).ln()) <= 1e-13);
            let scaled = lower_incomplete_gamma(s, x) * x.exp() * x.powf(-s);
            assert!(rel(scaled_lower_gamma(s, x), scaled) <= 1e-12);
        }
        // Gamma(1, x) = e^-x
        assert!(rel(upper_incomplete_gamma(1.0, 7.0), (-7.0f64).exp()) <= 1e-14);
        assert!(rel(ln_upper_incomplete_gamma(1.0, 800.0), -800.0) <= 1e-14);
    }
}
