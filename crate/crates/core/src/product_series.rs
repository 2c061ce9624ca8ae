//! Certified summation of series of the form
//!
//! ```text
//!     S(x) = sum_{i>=1} w_i P_i(x),     P_i(x) = prod_{j=1..i} x / (x + d_j)
//! ```
//!
//! which covers every equilibrium series of the model as well as the
//! power-law sums `K_{a,b}` and `H_{a,b}`.
//!
//! The tail after index `n` is bounded by combining `P_{n+m} <= P_n rho_n^m`
//! with `rho_n = x / (x + inf_{j>n} d_j)` and a polynomial envelope
//! `w_i <= W i^s` valid past `n`, giving a geometric majorant with ratio
//! `c_n = rho_n (1 + 1/n)^max(s,0)`.

use crate::coefficients::Envelope;
use crate::error::{Error, Result};
use crate::summation::{BoundedValue, CompensatedSum};

pub const DEFAULT_TERM_CAP: usize = 1_000_000;
pub const DEFAULT_TOL: f64 = 1e-12;

/// Source of the per-index data of a product series.
pub trait ProductSeries {
    /// `d_j` for `j >= 1`.
    fn shift(&self, j: usize) -> f64;
    /// A lower bound on `d_j` for all `j > i`.
    fn shift_lower_bound_beyond(&self, i: usize) -> f64;
    /// `w_i` for `i >= 1`.
    fn weight(&self, i: usize) -> f64;
    /// Envelope of `|w_i|` valid for all `i >= from`.
    fn weight_envelope(&self, from: usize) -> Envelope;
}

/// Geometric majorant of `sum_{i>n} |w_i| P_i` given `P_n`, or `None` when the
/// majorant ratio is not yet below one.
pub fn geometric_tail_bound<S: ProductSeries + ?Sized>(series: &S, x: f64, n: usize, p_n: f64) -> Option<f64> {
    if x == 0.0 {
        return Some(0.0);
    }
    let n = n.max(1);
    let lower = series.shift_lower_bound_beyond(n);
    let rho = x / (x + lower);
    let env = series.weight_envelope(n + 1);
    let growth = if env.exponent > 0.0 {
        (env.exponent * (1.0 / n as f64).ln_1p()).exp()
    } else {
        1.0
    };
    let c = rho * growth;
    if !(c < 1.0) {
        return None;
    }
    // an underflowed P_n still stands for a positive value
    let p = p_n.max(f64::MIN_POSITIVE);
    let lead = env.weight * (n as f64).powf(env.exponent) * p;
    Some(lead * c / (1.0 - c))
}

/// Sums the series until the certified tail is at most `tol`.
pub fn sum_certified<S: ProductSeries + ?Sized>(series: &S, x: f64, tol: f64, cap: usize) -> Result<BoundedValue> {
    if x == 0.0 {
        return Ok(BoundedValue::exact(0.0));
    }
    let mut acc = CompensatedSum::new();
    let mut p = 1.0;
    let mut last_bound = f64::INFINITY;
    for i in 1..=cap {
        p *= x / (x + series.shift(i));
        acc.add(series.weight(i) * p);
        if let Some(bound) = geometric_tail_bound(series, x, i, p) {
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

/// Certified bound on `sum_{i>n} |w_i| P_i` given `P_n`, stepping forward
/// exactly until the geometric majorant applies.
pub fn tail_after<S: ProductSeries + ?Sized>(series: &S, x: f64, n: usize, p_n: f64, cap: usize) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    let mut p = p_n;
    let mut i = n;
    loop {
        if let Some(bound) = geometric_tail_bound(series, x, i, p) {
            return Ok(acc.value() + bound);
        }
        if i >= cap {
            return Err(Error::TermCap {
                tol: f64::INFINITY,
                cap,
                tail_bound: f64::INFINITY,
            });
        }
        i += 1;
        p *= x / (x + series.shift(i));
        acc.add(series.weight(i).abs() * p);
    }
}

/// Product series from closures.
pub struct FnSeries<D, L, W, E> {
    pub shift: D,
    pub lower: L,
    pub weight: W,
    pub envelope: E,
}

impl<D, L, W, E> ProductSeries for FnSeries<D, L, W, E>
where
    D: Fn(usize) -> f64,
    L: Fn(usize) -> f64,
    W: Fn(usize) -> f64,
    E: Fn(usize) -> Envelope,
{
    fn shift(&self, j: usize) -> f64 {
        (self.shift)(j)
    }
    fn shift_lower_bound_beyond(&self, i: usize) -> f64 {
        (self.lower)(i)
    }
    fn weight(&self, i: usize) -> f64 {
        (self.weight)(i)
    }
    fn weight_envelope(&self, from: usize) -> Envelope {
        (self.envelope)(from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(dval: f64) -> impl ProductSeries {
        FnSeries {
            shift: move |_| dval,
            lower: move |_| dval,
            weight: |_| 1.0,
            envelope: |_| Envelope { weight: 1.0, exponent: 0.0 },
        }
    }

    #[test]
    fn geometric_series_closed_form() {
        // sum_{i>=1} y^i = y / (1 - y) = x / d with y = x / (x + d)
        for (x, d) in [(1.0, 1.0), (3.0, 0.5), (50.0, 2.0)] {
            let s = sum_certified(&geometric(d), x, 1e-13, DEFAULT_TERM_CAP).unwrap();
            let exact = x / d;
            assert!(s.value <= exact + 1e-12 * exact);
            assert!(s.upper() >= exact - 1e-12 * exact, "{s:?} vs {exact}");
            assert!(s.tail_bound <= 1e-13);
        }
    }

    #[test]
    fn term_cap_reported() {
        let err = sum_certified(&geometric(1e-3), 1e3, 1e-14, 100).unwrap_err();
        assert!(matches!(err, Error::TermCap { cap: 100, .. }));
    }

    #[test]
    fn tail_after_steps_past_growth_region() {
        // w_i = i^3 with x/(x+1) = 0.5: (1+1/n)^3 / 2 < 1 only from n = 4 on
        let s = FnSeries {
            shift: |_| 1.0,
            lower: |_| 1.0,
            weight: |i| (i as f64).powi(3),
            envelope: |_| Envelope { weight: 1.0, exponent: 3.0 },
        };
        let p1 = 0.5;
        let bound = tail_after(&s, 1.0, 1, p1, 1000).unwrap();
        // sum_{i>=2} i^3 2^-i = 26 - 1/2
        assert!(bound >= 25.5);
        assert!(bound.is_finite());
    }
}
