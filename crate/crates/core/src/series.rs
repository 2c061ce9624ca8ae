//! Equilibrium cohort profile and the infinite series of the steady state.
//!
//! At equilibrium every cohort is determined by the quartz level `x`:
//!
//! ```text
//!     M_i = r x^i / (k_i prod_{j=0..i} (x + d_j))
//! ```
//!
//! Writing `P_i = prod_{j=1..i} x / (x + d_j)`, the quartz balance becomes
//! `alpha / r = F(x)` with
//!
//! ```text
//!     F(x) = H(x) / (x + d_0),      H(x) = sum_{i>=1} i rho_i P_i.
//! ```
//!
//! `H` has nonnegative terms and is the primary route.  The flux form
//! `(x sum k_i M_i - sum i q_i M_i) / r` is evaluated alongside and the two
//! must agree within their combined tail bounds.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientFamily, Envelope, Quantity};
use crate::error::{invalid, Error, Result};
use crate::product_series::{self, ProductSeries, DEFAULT_TERM_CAP, DEFAULT_TOL};
use crate::summation::{BoundedValue, CompensatedSum};

/// Truncation controls shared by all series evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Absolute bound required of the certified tail.
    pub tol: f64,
    /// Maximum number of terms before giving up.
    pub term_cap: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            term_cap: DEFAULT_TERM_CAP,
        }
    }
}

impl SeriesOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Steady-state cohorts `M_0..M_n` at quartz level `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProfile {
    pub x: f64,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    /// Certified bound on `sum_{i > last stored index} M_i`.
    pub tail_mass_bound: f64,
    /// Set when cohorts underflowed before index `n`; the stored sequence
    /// stops at the last normal value and the rest is in the tail bound.
    pub truncated_at: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
enum Weight {
    Unit,
    IQOverK,
    IRho,
    InvK,
}

struct FamilySeries<'a> {
    fam: &'a CoefficientFamily,
    weight: Weight,
}

impl ProductSeries for FamilySeries<'_> {
    fn shift(&self, j: usize) -> f64 {
        self.fam.d(j)
    }

    fn shift_lower_bound_beyond(&self, i: usize) -> f64 {
        self.fam.inf_d_beyond(i)
    }

    fn weight(&self, i: usize) -> f64 {
        match self.weight {
            Weight::Unit => 1.0,
            Weight::IQOverK => i as f64 * self.fam.q_over_k(i),
            Weight::IRho => i as f64 * self.fam.rho(i),
            Weight::InvK => 1.0 / self.fam.k(i),
        }
    }

    fn weight_envelope(&self, from: usize) -> Envelope {
        let shifted = |e: Envelope| Envelope {
            weight: e.weight,
            exponent: e.exponent + 1.0,
        };
        match self.weight {
            Weight::Unit => Envelope {
                weight: 1.0,
                exponent: 0.0,
            },
            Weight::IQOverK => shifted(self.fam.envelope(Quantity::QOverK, from)),
            Weight::IRho => shifted(self.fam.envelope(Quantity::Rho, from)),
            Weight::InvK => self.fam.envelope(Quantity::InvK, from),
        }
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("x must be finite and nonnegative, got {x}")))
    }
}

fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("r must be positive, got {r}")))
    }
}

fn weighted_sum(fam: &CoefficientFamily, weight: Weight, x: f64, tol: f64, cap: usize) -> Result<BoundedValue> {
    product_series::sum_certified(&FamilySeries { fam, weight }, x, tol, cap)
}

/// Cohorts `M_0..M_n` by the forward recursion
/// `M_i (k_i x + p_i + q_i) = k_{i-1} x M_{i-1}`.
pub fn cohort_profile(fam: &CoefficientFamily, x: f64, r: f64, n: usize) -> Result<EquilibriumProfile> {
    check_x(x)?;
    check_r(r)?;
    fam.require_positive_z()?;

    let mut m = Vec::with_capacity(n + 1);
    m.push(r / (fam.k(0) * x + fam.p(0) + fam.q(0)));
    let mut truncated_at = None;
    for i in 1..=n {
        let next = m[i - 1] * (fam.k(i - 1) * x) / (fam.k(i) * x + fam.p(i) + fam.q(i));
        if x > 0.0 && next < f64::MIN_POSITIVE {
            truncated_at = Some(i);
            break;
        }
        m.push(next);
    }

    let last = m.len() - 1;
    let tail_mass_bound = if x == 0.0 {
        0.0
    } else {
        let d0 = fam.d(0);
        let prefactor = r / (x + d0);
        let p_last = m[last] * fam.k(last) / prefactor;
        let series = FamilySeries { fam, weight: Weight::InvK };
        prefactor * product_series::tail_after(&series, x, last, p_last, DEFAULT_TERM_CAP)?
    };

    Ok(EquilibriumProfile {
        x,
        r,
        m,
        tail_mass_bound,
        truncated_at,
    })
}

/// `sum_{i>=0} k_i M_i`, the total phagocytosis rate per unit quartz.
pub fn sum_k_m(fam: &CoefficientFamily, x: f64, r: f64, opts: SeriesOptions) -> Result<BoundedValue> {
    check_x(x)?;
    check_r(r)?;
    opts.validate()?;
    fam.require_positive_z()?;
    let prefactor = r / (x + fam.d(0));
    let inner = weighted_sum(fam, Weight::Unit, x, opts.tol / prefactor, opts.term_cap)?;
    Ok(BoundedValue {
        value: prefactor * (1.0 + inner.value),
        tail_bound: prefactor * inner.tail_bound,
        terms_used: inner.terms_used + 1,
    })
}

/// `sum_{i>=0} i q_i M_i`, the rate at which dying macrophages release quartz.
pub fn sum_iq_m(fam: &CoefficientFamily, x: f64, r: f64, opts: SeriesOptions) -> Result<BoundedValue> {
    check_x(x)?;
    check_r(r)?;
    opts.validate()?;
    fam.require_positive_z()?;
    let prefactor = r / (x + fam.d(0));
    let inner = weighted_sum(fam, Weight::IQOverK, x, opts.tol / prefactor, opts.term_cap)?;
    Ok(inner.scaled(prefactor))
}

/// `H(x) = sum_{i>=1} i rho_i prod_{j=1..i} x / (x + d_j)`.
pub fn h_series(fam: &CoefficientFamily, x: f64, opts: SeriesOptions) -> Result<BoundedValue> {
    check_x(x)?;
    opts.validate()?;
    fam.require_positive_z()?;
    weighted_sum(fam, Weight::IRho, x, opts.tol, opts.term_cap)
}

/// The equilibrium function `F`; an equilibrium exists at `x` iff
/// `alpha / r = F(x)`.
///
/// Computed as `H(x) / (x + d_0)` and checked against the flux form
/// `x sum k_i M_i - sum i q_i M_i` (with `r = 1`).
pub fn f_equilibrium(fam: &CoefficientFamily, x: f64, opts: SeriesOptions) -> Result<BoundedValue> {
    check_x(x)?;
    opts.validate()?;
    fam.require_positive_z()?;
    if x == 0.0 {
        return Ok(BoundedValue::exact(0.0));
    }
    let shift = x + fam.d(0);
    let h = h_series(fam, x, SeriesOptions { tol: opts.tol * shift, ..opts })?;
    let f = h.scaled(1.0 / shift);

    let uptake = sum_k_m(fam, x, 1.0, SeriesOptions { tol: opts.tol / x.max(1.0), ..opts })?;
    let release = sum_iq_m(fam, x, 1.0, opts)?;
    let flux = x * uptake.value - release.value;
    let discrepancy = (flux - f.value).abs();
    // each term is a running product, so its relative error grows with the index
    let terms = uptake.terms_used.max(release.terms_used).max(h.terms_used) as f64;
    let rounding = (64.0 + 2.0 * terms) * f64::EPSILON * (x * uptake.value + release.value + f.value);
    let allowed = x * uptake.tail_bound + release.tail_bound + f.tail_bound + rounding;
    if discrepancy > allowed {
        return Err(Error::Consistency {
            what: "H-form and flux-form of F disagree",
            discrepancy,
            allowed,
        });
    }
    Ok(f)
}

/// Partial sum of `F` in its raw form
/// `x/(x+d_0) + 1/(x+d_0) sum_{i=1..n} (x - i q_i/k_i) P_i`, whose terms may
/// have either sign.  Only used for audits.
pub fn f_raw_partial(fam: &CoefficientFamily, x: f64, n: usize) -> Result<f64> {
    check_x(x)?;
    fam.require_positive_z()?;
    let shift = x + fam.d(0);
    let mut acc = CompensatedSum::new();
    acc.add(x);
    let mut p = 1.0;
    for i in 1..=n {
        p *= x / (x + fam.d(i));
        acc.add((x - i as f64 * fam.q_over_k(i)) * p);
    }
    Ok(acc.value() / shift)
}

/// Result of the telescoping audit of `G(x) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GAudit {
    /// `S_n = (1/x) sum_{i=1..n} (i d_i - x) P_i`
    pub partial_sum: f64,
    /// `a_n = (n + 1) x^n / prod_{j=1..n} (x + d_j)`
    pub a_n: f64,
    /// `|1 - S_n - a_n|`
    pub closed_form_residual: f64,
}

/// Checks `1 - S_n = a_n` for the series whose limit proves `G = 0`.
pub fn audit_g_identity(fam: &CoefficientFamily, x: f64, n: usize) -> Result<GAudit> {
    check_x(x)?;
    fam.require_positive_z()?;
    if x == 0.0 {
        return Ok(GAudit {
            partial_sum: 0.0,
            a_n: 0.0,
            closed_form_residual: 0.0,
        });
    }
    let mut partial = CompensatedSum::new();
    let mut residual = CompensatedSum::new();
    residual.add(1.0);
    let mut p = 1.0;
    for i in 1..=n {
        p *= x / (x + fam.d(i));
        let term = (i as f64 * fam.d(i) - x) * p / x;
        partial.add(term);
        residual.add(-term);
    }
    let a_n = (n as f64 + 1.0) * p;
    residual.add(-a_n);
    Ok(GAudit {
        partial_sum: partial.value(),
        a_n,
        closed_form_residual: residual.value().abs(),
    })
}

/// Result of the telescoping audit of `sum_i d_i P_i = x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DAudit {
    /// `sum_{i=1..n} d_i P_i`
    pub partial_sum: f64,
    /// `b_n = x^{n+1} / prod_{j=1..n} (x + d_j)`
    pub b_n: f64,
    /// `|x - b_n - partial_sum|`
    pub residual: f64,
}

pub fn audit_d_identity(fam: &CoefficientFamily, x: f64, n: usize) -> Result<DAudit> {
    check_x(x)?;
    fam.require_positive_z()?;
    if x == 0.0 {
        return Ok(DAudit {
            partial_sum: 0.0,
            b_n: 0.0,
            residual: 0.0,
        });
    }
    let mut partial = CompensatedSum::new();
    let mut residual = CompensatedSum::new();
    residual.add(x);
    let mut p = 1.0;
    for i in 1..=n {
        p *= x / (x + fam.d(i));
        let term = fam.d(i) * p;
        partial.add(term);
        residual.add(-term);
    }
    let b_n = x * p;
    residual.add(-b_n);
    Ok(DAudit {
        partial_sum: partial.value(),
        b_n,
        residual: residual.value().abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::PowerLawParams;

    fn unit_pc(n: usize) -> CoefficientFamily {
        CoefficientFamily::piecewise(1.0, n).unwrap()
    }

    #[test]
    fn profile_at_zero_quartz() {
        let fam = CoefficientFamily::power_law(PowerLawParams::new(0.5, 1.0, 0.5).unwrap()).unwrap();
        let prof = cohort_profile(&fam, 0.0, 2.0, 10).unwrap();
        assert_eq!(prof.m[0], 2.0 / (1.0 + 0.0));
        assert!(prof.m[1..].iter().all(|&v| v == 0.0));
        assert_eq!(prof.m.len(), 11);
        assert_eq!(prof.tail_mass_bound, 0.0);
    }

    #[test]
    fn profile_unit_piecewise_is_dyadic() {
        let prof = cohort_profile(&unit_pc(3), 1.0, 1.0, 40).unwrap();
        for (i, m) in prof.m.iter().enumerate() {
            let exact = 0.5f64.powi(i as i32 + 1);
            assert!((m - exact).abs() <= 4.0 * f64::EPSILON * exact, "M_{i}");
        }
        // sum_{i>40} 2^-(i+1) = 2^-41
        let exact_tail = 0.5f64.powi(41);
        assert!(prof.tail_mass_bound >= exact_tail * (1.0 - 1e-12));
        assert!(prof.tail_mass_bound <= 4.0 * exact_tail);
    }

    #[test]
    fn profile_underflow_is_truncated() {
        let fam = CoefficientFamily::piecewise(1.0, 2).unwrap();
        let prof = cohort_profile(&fam, 1e-3, 1.0, 5000).unwrap();
        let cut = prof.truncated_at.expect("underflow expected");
        assert_eq!(prof.m.len(), cut);
        assert!(prof.m.iter().all(|&v| v >= f64::MIN_POSITIVE));
        assert!(prof.tail_mass_bound < 1e-300);
    }

    #[test]
    fn profile_satisfies_recursion() {
        let fam = CoefficientFamily::power_law(PowerLawParams::new(0.3, 0.7, 0.4).unwrap()).unwrap();
        let (x, r) = (2.5, 0.8);
        let prof = cohort_profile(&fam, x, r, 60).unwrap();
        let lhs0 = prof.m[0] * (fam.k(0) * x + fam.p(0) + fam.q(0));
        assert!((lhs0 - r).abs() <= 4.0 * f64::EPSILON * r);
        for i in 1..prof.m.len() {
            let lhs = prof.m[i] * (fam.k(i) * x + fam.p(i) + fam.q(i));
            let rhs = fam.k(i - 1) * x * prof.m[i - 1];
            assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs.abs(), "i = {i}");
            let ratio = prof.m[i] / prof.m[i - 1];
            let expected = fam.k(i - 1) / fam.k(i) * x / (x + fam.d(i));
            assert!((ratio - expected).abs() <= 8.0 * f64::EPSILON * expected);
        }
    }

    #[test]
    fn uptake_sum_at_zero_quartz() {
        let fam = CoefficientFamily::tabulated(vec![2.0, 1.0], vec![0.5, 1.0], vec![0.25, 0.0]).unwrap();
        let s = sum_k_m(&fam, 0.0, 3.0, SeriesOptions::default()).unwrap();
        assert_eq!(s.value, 2.0 * 3.0 / 0.75);
        assert_eq!(sum_iq_m(&fam, 0.0, 3.0, SeriesOptions::default()).unwrap().value, 0.0);
    }

    #[test]
    fn piecewise_uptake_equals_rk() {
        for &(k, n, r, x) in &[(1.0, 1, 1.0, 1.0), (2.5, 3, 0.7, 10.0), (0.3, 10, 2.0, 0.05)] {
            let fam = CoefficientFamily::piecewise(k, n).unwrap();
            let s = sum_k_m(&fam, x, r, SeriesOptions::default()).unwrap();
            assert!(s.encloses(r * k, 1e-13 * r * k), "{s:?} vs {}", r * k);
        }
    }

    #[test]
    fn piecewise_release_closed_form() {
        for &(k, n, r, x) in &[(1.0, 1, 1.0, 1.0), (2.5, 3, 0.7, 10.0), (0.3, 10, 2.0, 0.05)] {
            let fam = CoefficientFamily::piecewise(k, n).unwrap();
            let s = sum_iq_m(&fam, x, r, SeriesOptions::default()).unwrap();
            let y: f64 = x / (x + 1.0 / k);
            let exact = r * y.powi(n as i32 + 1) * (k * x + n as f64 + 1.0);
            assert!(s.encloses(exact, 1e-13 * exact.max(1.0)), "{s:?} vs {exact}");
        }
    }

    #[test]
    fn f_unit_piecewise_n1() {
        let f = f_equilibrium(&unit_pc(1), 1.0, SeriesOptions::default()).unwrap();
        assert!((f.value - 0.25).abs() <= 1e-12);
        assert_eq!(f_equilibrium(&unit_pc(1), 0.0, SeriesOptions::default()).unwrap().value, 0.0);
    }

    #[test]
    fn raw_form_matches_h_form() {
        let fam = CoefficientFamily::power_law(PowerLawParams::from_ab(2.0, 0.0).unwrap()).unwrap();
        for x in [0.5, 3.0, 40.0] {
            let f = f_equilibrium(&fam, x, SeriesOptions::default()).unwrap();
            let raw = f_raw_partial(&fam, x, f.terms_used + 200).unwrap();
            assert!((raw - f.value).abs() <= 1e-10 * f.value.max(1.0), "x={x}: {raw} vs {}", f.value);
        }
    }

    #[test]
    fn f_grows_in_always_exists_regime() {
        let fam = CoefficientFamily::power_law(PowerLawParams::from_ab(1.0, 1.0).unwrap()).unwrap();
        let mut prev = 0.0;
        for e in 0..=8 {
            let x = 10f64.powf(e as f64 * 0.5);
            let f = f_equilibrium(&fam, x, SeriesOptions::default()).unwrap().value;
            assert!(f > prev, "x = {x}");
            prev = f;
        }
        assert!(prev > 30.0);
    }

    #[test]
    fn h_bounded_by_linear_envelope() {
        // i rho_i = i^2 <= 1 * (i^2 + i) = d_i for (a, b) = (2, 1)
        let fam = CoefficientFamily::power_law(PowerLawParams::from_ab(2.0, 1.0).unwrap()).unwrap();
        for x in [0.1, 1.0, 7.0, 100.0, 1e4] {
            let h = h_series(&fam, x, SeriesOptions::default()).unwrap();
            assert!(h.value <= x * (1.0 + 1e-12), "x = {x}");
        }
    }

    #[test]
    fn g_audit_cases() {
        let fam = CoefficientFamily::power_law(PowerLawParams::new(0.2, 1.3, 0.1).unwrap()).unwrap();
        let audit = audit_g_identity(&fam, 2.0, 50).unwrap();
        assert!(audit.closed_form_residual <= 1e-12);
        let zero = audit_g_identity(&fam, 0.0, 50).unwrap();
        assert_eq!(zero.closed_form_residual, 0.0);

        let pc = CoefficientFamily::piecewise(0.5, 3).unwrap();
        let z = pc.z();
        for n in [10, 100, 1000] {
            let x = 50.0;
            let a = audit_g_identity(&pc, x, n).unwrap();
            let bound = (n as f64 + 1.0) * (x / (x + z)).powi(n as i32);
            assert!(a.a_n > 0.0 && a.a_n <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn d_audit_cases() {
        let a = audit_d_identity(&unit_pc(4), 1.0, 20).unwrap();
        let exact = 1.0 - 0.5f64.powi(20);
        assert!((a.partial_sum - exact).abs() <= 1e-15);
        assert!(a.residual <= 1e-15);
        let zero = audit_d_identity(&unit_pc(4), 0.0, 20).unwrap();
        assert_eq!((zero.partial_sum, zero.residual), (0.0, 0.0));

        let fam = CoefficientFamily::power_law(PowerLawParams::from_ab(1.5, -0.5).unwrap()).unwrap();
        let z = fam.z();
        for n in [10, 100] {
            let x = 4.0;
            let a = audit_d_identity(&fam, x, n).unwrap();
            assert!(a.b_n > 0.0 && a.b_n <= x * (x / (x + z)).powi(n as i32) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn series_rejects_zero_infimum() {
        let fam = CoefficientFamily::tabulated(vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            h_series(&fam, 1.0, SeriesOptions::default()),
            Err(Error::NonPositiveInfimum(_))
        ));
    }

    #[test]
    fn unreachable_tolerance_reports_cap() {
        let fam = unit_pc(1);
        let opts = SeriesOptions { tol: 1e-12, term_cap: 50 };
        assert!(matches!(sum_k_m(&fam, 1e3, 1.0, opts), Err(Error::TermCap { .. })));
    }
}
