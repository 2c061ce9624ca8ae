//! `R(a, A; v) = sum_{i>=1} exp(-v i^(a+1)) i^A`.
//!
//! For small `v` the Mellin transform `Gamma(s) zeta((a+1)s - A)` has a pole
//! of `Gamma(s)` at each `s = -k` and of `zeta` at `s = (A+1)/(a+1)`, giving
//!
//! ```text
//!     R ~ Gamma(s0)/(a+1) v^(-s0) + sum_k (-1)^k/k! zeta(-A - k(a+1)) v^k,   s0 = (A+1)/(a+1).
//! ```
//!
//! When `s0 = -k0` the two poles merge; the double pole contributes
//! `(-1)^k0 / ((a+1) k0!) (ln(1/v) + H_k0 + a gamma) v^k0`.

use super::{AsymptoticExpansion, Remainder, Term, Variable, EXPONENT_TOL};
use crate::error::{invalid, Error, Result};
use crate::special::{gamma, harmonic, zeta, EULER_GAMMA};
use crate::summation::{BoundedValue, CompensatedSum};

/// Direct summation with a certified tail.
///
/// The term ratio past `n` is at most
/// `c_n = (1 + 1/n)^max(A,0) exp(-v (a+1) n^a)`, which decreases in `n`, so
/// once `c_n < 1` the tail is bounded by `t_n c_n / (1 - c_n)`.
pub fn r_sum_direct(a: f64, big_a: f64, v: f64, tol: f64, cap: usize) -> Result<BoundedValue> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("v must be positive, got {v}")));
    }
    let mut acc = CompensatedSum::new();
    let mut last_bound = f64::INFINITY;
    for i in 1..=cap {
        let fi = i as f64;
        let term = (-v * fi.powf(a + 1.0) + big_a * fi.ln()).exp();
        acc.add(term);
        let growth = if big_a > 0.0 { (big_a * (1.0 / fi).ln_1p()).exp() } else { 1.0 };
        let c = growth * (-v * (a + 1.0) * fi.powf(a)).exp();
        if c < 1.0 {
            let bound = term * c / (1.0 - c);
            last_bound = bound;
            if bound <= tol {
                return Ok(BoundedValue {
                    value: acc.value(),
                    tail_bound: bound,
                    terms_used: i,
                });
            }
        }
    }
    Err(Error::TermCap {
        tol,
        cap,
        tail_bound: last_bound,
    })
}

/// `-k0` when `(A+1)/(a+1)` is a non-positive integer.
pub(crate) fn pole_index(s0: f64) -> Option<usize> {
    let k = -s0;
    (k > -EXPONENT_TOL && (k - k.round()).abs() <= EXPONENT_TOL).then(|| k.round() as usize)
}

/// Small-`v` expansion of `R(a, A; v)` through the `v^depth` residue.
pub fn r_expansion(a: f64, big_a: f64, depth: usize) -> Result<AsymptoticExpansion> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    if !big_a.is_finite() {
        return Err(invalid("A must be finite"));
    }
    let s0 = (big_a + 1.0) / (a + 1.0);
    let pole = pole_index(s0);
    let mut terms = Vec::with_capacity(depth + 3);
    if pole.is_none() {
        terms.push(Term {
            coeff: gamma(s0) / (a + 1.0),
            power: -s0,
            log_power: 0,
        });
    }
    let mut factorial = 1.0;
    for k in 0..=depth {
        if k > 0 {
            factorial *= k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        if pole == Some(k) {
            let c = sign / ((a + 1.0) * factorial);
            terms.push(Term {
                coeff: c,
                power: k as f64,
                log_power: 1,
            });
            terms.push(Term {
                coeff: c * (harmonic(k) + a * EULER_GAMMA),
                power: k as f64,
                log_power: 0,
            });
            continue;
        }
        let arg = -big_a - k as f64 * (a + 1.0);
        if (arg - 1.0).abs() <= EXPONENT_TOL {
            return Err(Error::ZetaPole(k));
        }
        terms.push(Term {
            coeff: sign / factorial * zeta(arg),
            power: k as f64,
            log_power: 0,
        });
    }
    Ok(AsymptoticExpansion::new(
        Variable::VToZero,
        terms,
        Remainder {
            power: depth as f64 + 0.5,
            log_power: 0,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::product_series::DEFAULT_TERM_CAP;
    use std::f64::consts::PI;

    fn direct(a: f64, big_a: f64, v: f64) -> f64 {
        r_sum_direct(a, big_a, v, 1e-15, DEFAULT_TERM_CAP).unwrap().value
    }

    #[test]
    fn large_v_single_term() {
        let r = r_sum_direct(1.0, 3.0, 50.0, 1e-30, 100).unwrap();
        assert!((r.value - (-50.0f64).exp()).abs() <= 1e-20);
    }

    #[test]
    fn gaussian_sum_stabilises() {
        let five: f64 = (1..=5).map(|i| (-((i * i) as f64)).exp()).sum();
        let ten: f64 = (1..=10).map(|i| (-((i * i) as f64)).exp()).sum();
        assert!((five - ten).abs() <= 1e-15);
        let r = r_sum_direct(1.0, 0.0, 1.0, 1e-16, 100).unwrap();
        assert!((r.value - ten).abs() <= 1e-16);
        assert!(r.terms_used <= 6);
    }

    #[test]
    fn monotone_in_v() {
        let vs = [1e-3, 1e-2, 0.1, 1.0];
        for w in vs.windows(2) {
            assert!(direct(1.0, 1.0, w[0]) > direct(1.0, 1.0, w[1]));
        }
    }

    #[test]
    fn leading_terms() {
        let e = r_expansion(1.0, 1.0, 1).unwrap();
        assert!((e.coefficient(-1.0, 0) - 0.5).abs() <= 1e-15);
        let e = r_expansion(1.0, -2.0, 1).unwrap();
        assert!((e.coefficient(0.5, 0) + PI.sqrt()).abs() <= 1e-14);
        assert!((e.coefficient(0.0, 0) - PI * PI / 6.0).abs() <= 1e-14);
    }

    #[test]
    fn pole_case_has_log_term() {
        let e = r_expansion(1.0, -3.0, 2).unwrap();
        assert!((e.coefficient(1.0, 1) + 0.5).abs() <= 1e-15);
        assert!((e.coefficient(1.0, 0) + 0.5 * (1.0 + EULER_GAMMA)).abs() <= 1e-15);
        // no separate Gamma term at the merged pole
        assert_eq!(e.terms.len(), 4);
    }

    #[test]
    fn expansion_matches_direct_sum() {
        for &(a, big_a) in &[(1.0, 1.0), (1.0, -2.0), (2.0, 0.0), (1.0, -3.0), (0.5, 0.7)] {
            let e = r_expansion(a, big_a, 2).unwrap();
            for &v in &[1e-2, 1e-3] {
                let res = (direct(a, big_a, v) - e.eval(v)).abs();
                assert!(res <= 10.0 * v.powi(3) + 1e-12 * direct(a, big_a, v).abs(), "a={a} A={big_a} v={v}: {res}");
            }
        }
    }
}
