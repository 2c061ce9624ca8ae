//! The power-law sums
//!
//! ```text
//!     K_{a,b}(x) = sum_i i^(b+1) prod_{j<=i} x / (x + j^a),
//!     H_{a,b}(x) = sum_i i^(b+1) prod_{j<=i} x / (x + j^a + j^b),
//! ```
//!
//! and the large-`x` expansion of `K_{a,b}`.
//!
//! Writing `prod_{j<=i} x/(x + j^a) = exp(-i^(a+1)/((a+1)x)) exp(T_i)` with
//!
//! ```text
//!     T_i = i^(a+1)/((a+1)x) - sum_{l>=1} (-1)^(l-1)/(l x^l) S_{la}(i),    S_c(i) = sum_{j<=i} j^c,
//! ```
//!
//! and expanding `exp(T_i)` into monomials `c i^A / x^B` turns `K` into a sum of
//! `c x^-B R(a, b+1+A; 1/((a+1)x))`, each of which is expanded by
//! [`r_expansion`](super::r_expansion).  A monomial of grade
//! `g = (a+1)B - A` first contributes at order `x^((b+2-g)/(a+1))`.

use std::collections::BTreeMap;

use super::r_series::pole_index;
use super::{AsymptoticExpansion, Remainder, Term, Variable, EXPONENT_TOL};
use crate::coefficients::{power_sum_inf, Envelope};
use crate::error::{invalid, Error, Result};
use crate::product_series::{sum_certified, FnSeries};
use crate::special::{bernoulli, gamma, harmonic, scaled_lower_gamma, upper_incomplete_gamma, zeta, EULER_GAMMA, MAX_BERNOULLI};
use crate::summation::BoundedValue;

/// Largest supported expansion depth.
pub const MAX_DEPTH: usize = 2;

fn check_ab(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    if !b.is_finite() {
        return Err(invalid("b must be finite"));
    }
    Ok(())
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid(format!("x must be finite and non-negative, got {x}")));
    }
    Ok(())
}

/// `K_{a,b}(x)` with a certified tail.
pub fn k_direct(a: f64, b: f64, x: f64, tol: f64, cap: usize) -> Result<BoundedValue> {
    check_ab(a, b)?;
    check_x(x)?;
    let series = FnSeries {
        shift: |j: usize| (j as f64).powf(a),
        lower: |i: usize| ((i + 1) as f64).powf(a),
        weight: |i: usize| (i as f64).powf(b + 1.0),
        envelope: |_| Envelope {
            weight: 1.0,
            exponent: b + 1.0,
        },
    };
    sum_certified(&series, x, tol, cap)
}

/// `H_{a,b}(x)` with a certified tail.
pub fn h_direct(a: f64, b: f64, x: f64, tol: f64, cap: usize) -> Result<BoundedValue> {
    check_ab(a, b)?;
    check_x(x)?;
    let series = FnSeries {
        shift: |j: usize| {
            let t = j as f64;
            t.powf(a) + t.powf(b)
        },
        lower: |i: usize| power_sum_inf(a, b, i + 1),
        weight: |i: usize| (i as f64).powf(b + 1.0),
        envelope: |_| Envelope {
            weight: 1.0,
            exponent: b + 1.0,
        },
    };
    sum_certified(&series, x, tol, cap)
}

/// `H_{1,0}(x) = x - e^x (Gamma(x+2) - Gamma(x+2, x)) x^(-x-1)`.
///
/// Up to `x = 50` the incomplete Gamma difference is formed literally;
/// beyond, the scaled lower function `e^x x^-(x+2) gamma(x+2, x)` is used.
pub fn h10_closed_form(x: f64) -> Result<f64> {
    check_x(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let s = x + 2.0;
    if x <= 50.0 {
        let lower = gamma(s) - upper_incomplete_gamma(s, x);
        Ok(x - lower * (x - (x + 1.0) * x.ln()).exp())
    } else {
        Ok(x - x * scaled_lower_gamma(s, x))
    }
}

fn check_b_range(b: f64) -> Result<()> {
    if (b + 2.0).abs() <= EXPONENT_TOL {
        return Err(Error::LogOrder);
    }
    if b < -2.0 {
        return Err(invalid(format!("b must exceed -2, got {b}")));
    }
    Ok(())
}

/// Leading term `Gamma(s) (a+1)^(s-1) x^s`, `s = (b+2)/(a+1)`.
pub fn k_leading_asymptotics(a: f64, b: f64) -> Result<AsymptoticExpansion> {
    check_ab(a, b)?;
    check_b_range(b)?;
    let s = (b + 2.0) / (a + 1.0);
    let remainder = if b > -1.0 { (b + 1.0) / (a + 1.0) } else { 0.0 };
    Ok(AsymptoticExpansion::new(
        Variable::XToInfinity,
        vec![Term {
            coeff: gamma(s) * (a + 1.0).powf(s - 1.0),
            power: s,
            log_power: 0,
        }],
        Remainder {
            power: remainder,
            log_power: 0,
        },
    ))
}

/// Monomial `i^(p a + q) x^-B`.
type Key = (i32, i32, i32);
type Poly = BTreeMap<Key, f64>;

struct Truncation {
    a: f64,
    depth: usize,
    /// Order below which every term is discarded.
    rho: f64,
    integer_a: bool,
}

impl Truncation {
    fn grade(&self, (p, q, b): Key) -> f64 {
        (b - p) as f64 * self.a + (b - q) as f64
    }

    fn keep(&self, key: Key) -> bool {
        self.grade(key) < self.depth as f64 + 1.0 - EXPONENT_TOL || (self.integer_a && -(key.2 as f64) > self.rho + EXPONENT_TOL)
    }

    fn insert(&self, poly: &mut Poly, key: Key, coeff: f64) {
        if coeff != 0.0 && self.keep(key) {
            *poly.entry(key).or_insert(0.0) += coeff;
        }
    }

    fn multiply(&self, lhs: &Poly, rhs: &Poly) -> Poly {
        let mut out = Poly::new();
        for (&(p1, q1, b1), &c1) in lhs {
            for (&(p2, q2, b2), &c2) in rhs {
                self.insert(&mut out, (p1 + p2, q1 + q2, b1 + b2), c1 * c2);
            }
        }
        out
    }
}

/// The exponent `T_i` as a truncated monomial sum.
fn log_correction(tr: &Truncation) -> Poly {
    let a = tr.a;
    let mut t = Poly::new();
    let max_l = tr.depth as i32 + 2 + (-tr.rho).ceil().max(0.0) as i32;
    for l in 1..=max_l {
        let c_l = if l % 2 == 0 { 1.0 } else { -1.0 } / l as f64;
        let c = l as f64 * a;
        if l > 1 {
            tr.insert(&mut t, (l, 1, l), c_l / (c + 1.0));
        }
        tr.insert(&mut t, (l, 0, l), 0.5 * c_l);
        tr.insert(&mut t, (0, 0, l), c_l * zeta(-c));
        // Euler–Maclaurin corrections B_2k/(2k)! c(c-1)...(c-2k+2) i^(c-2k+1)
        let mut falling = c;
        let mut fact = 2.0;
        for k in 1..=(MAX_BERNOULLI / 2) as i32 {
            if k > 1 {
                let m = (2 * k - 2) as f64;
                falling *= (c - m + 1.0) * (c - m);
                fact *= (m + 1.0) * (m + 2.0);
            }
            let key = (l, 1 - 2 * k, l);
            if falling == 0.0 || !tr.keep(key) {
                break;
            }
            tr.insert(&mut t, key, c_l * bernoulli(2 * k as usize) / fact * falling);
        }
    }
    t
}

/// Expansion of `K_{a,b}(x)` as `x -> oo` through `depth` orders
/// `x^(-1/(a+1))` below the leading term.
///
/// The remainder is `x^((b+1-depth)/(a+1))` for integer `a`; for other `a`
/// the Euler–Maclaurin series of the exponent does not terminate and the
/// remainder is floored at `x^-1`.  At depth 0 the result is the leading
/// term, plus the constant `zeta(-b-1)` when `b < -1`.
pub fn k_expansion_refined(a: f64, b: f64, depth: usize) -> Result<AsymptoticExpansion> {
    check_ab(a, b)?;
    check_b_range(b)?;
    if depth > MAX_DEPTH {
        return Err(Error::DepthUnsupported(depth));
    }
    let integer_a = (a - a.round()).abs() <= EXPONENT_TOL;
    let rho = (b + 1.0 - depth as f64) / (a + 1.0);
    let rho_eff = if integer_a { rho } else { rho.max(-1.0) };
    let tr = Truncation {
        a,
        depth,
        rho: rho_eff,
        integer_a,
    };

    // exp(T) = sum_m T^m / m!
    let t = log_correction(&tr);
    let mut exp_t = Poly::new();
    exp_t.insert((0, 0, 0), 1.0);
    let mut power = exp_t.clone();
    for m in 1.. {
        power = tr.multiply(&power, &t);
        if power.is_empty() {
            break;
        }
        for (key, c) in &power {
            *exp_t.entry(*key).or_insert(0.0) += c / factorial(m);
        }
    }

    let ap1 = a + 1.0;
    let mut terms = Vec::new();
    let mut remainder_log = 0;
    for (&(p, q, big_b), &c) in &exp_t {
        let big_a = p as f64 * a + q as f64;
        let bb = big_b as f64;
        let s = (b + 2.0 + big_a) / ap1;
        let pole = pole_index(s);
        if pole.is_none() && s - bb > rho_eff + EXPONENT_TOL {
            terms.push(Term {
                coeff: c * gamma(s) * ap1.powf(s - 1.0),
                power: s - bb,
                log_power: 0,
            });
        }
        if let Some(k0) = pole {
            if (-(k0 as f64) - bb - rho_eff).abs() <= EXPONENT_TOL {
                remainder_log = 1;
            }
        }
        let mut k = 0usize;
        let mut fact = 1.0;
        while -(k as f64) - bb > rho_eff + EXPONENT_TOL {
            if k > 0 {
                fact *= k as f64;
            }
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            let scale = ap1.powi(-(k as i32));
            let power = -(k as f64) - bb;
            if pole == Some(k) {
                let coeff = c * sign / (ap1 * fact) * scale;
                terms.push(Term { coeff, power, log_power: 1 });
                terms.push(Term {
                    coeff: coeff * (ap1.ln() + harmonic(k) + a * EULER_GAMMA),
                    power,
                    log_power: 0,
                });
            } else {
                let arg = -(b + 1.0 + big_a) - k as f64 * ap1;
                if (arg - 1.0).abs() <= EXPONENT_TOL {
                    return Err(Error::ZetaPole(k));
                }
                terms.push(Term {
                    coeff: c * sign / fact * zeta(arg) * scale,
                    power,
                    log_power: 0,
                });
            }
            k += 1;
        }
    }
    let mut exp = AsymptoticExpansion::new(
        Variable::XToInfinity,
        terms,
        Remainder {
            power: rho_eff,
            log_power: remainder_log,
        },
    );
    // cancellations leave rounding-level residues
    let scale = exp.terms.iter().map(|t| t.coeff.abs()).fold(0.0, f64::max);
    exp.terms.retain(|t| t.coeff.abs() > 1e-14 * scale);
    Ok(exp)
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|j| j as f64).product()
}
