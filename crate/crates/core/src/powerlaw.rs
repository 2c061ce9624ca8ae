//! Existence of equilibria for power-law rates, `d_i = i^a + i^b`,
//! `rho_i = i^b`.
//!
//! Since `F(x) = H(x) / (x + d_0)` and `H` grows like `x^((b+2)/(a+1))`, the
//! position of `b` relative to `a - 1` decides whether `F` is unbounded,
//! bounded with a supremum `m`, or bounded and decaying back to zero.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientFamily, PowerLawParams};
use crate::error::{invalid, Error, Result};
use crate::series::{f_equilibrium, h_series, SeriesOptions};

/// Tolerance on `b - (a - 1)` for the boundary case.
pub const REGIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `b > a - 1`: `F` is unbounded, an equilibrium exists for every `alpha / r`.
    AlwaysExists,
    /// `b = a - 1`: equilibrium iff `alpha / r < m`.
    ThresholdStrict,
    /// `b < a - 1`: equilibrium iff `alpha / r <= m`.
    ThresholdWeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Existence {
    Exists,
    NotExists,
    /// `alpha / r` lies within the error bar of `m`.
    AtThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "x")]
pub enum Attainment {
    /// Maximum attained at this `x`.
    At(f64),
    /// `F` still increases at the edge of the grid; `m` is the edge value.
    SupremumAtInfinity,
}

/// Numerical estimate of `m = sup F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MEstimate {
    pub m: f64,
    pub error_bar: f64,
    pub attained_at: Attainment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub a: f64,
    pub b: f64,
    pub regime: Regime,
    pub m_estimate: Option<MEstimate>,
}

impl RegimeVerdict {
    pub fn existence(&self, alpha_over_r: f64) -> Existence {
        decide(self.regime, self.m_estimate.as_ref(), alpha_over_r)
    }
}

/// Regime of an `(a, b)` pair.
pub fn classify_ab(a: f64, b: f64) -> Result<Regime> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(invalid(format!("a must be finite and nonnegative, got {a}")));
    }
    if !(b.is_finite() && b > -2.0) {
        return Err(invalid(format!("b must exceed -2, got {b}")));
    }
    let gap = b - (a - 1.0);
    Ok(if gap.abs() <= REGIME_TOL {
        Regime::ThresholdStrict
    } else if gap > 0.0 {
        Regime::AlwaysExists
    } else {
        Regime::ThresholdWeak
    })
}

/// Regime of a parameter set, without an `m` estimate.
pub fn classify_regime(params: &PowerLawParams) -> Result<RegimeVerdict> {
    params.validate()?;
    let (a, b) = (params.a(), params.b());
    Ok(RegimeVerdict {
        a,
        b,
        regime: classify_ab(a, b)?,
        m_estimate: None,
    })
}

/// Options for [`estimate_m`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MSearch {
    pub x_min: f64,
    pub x_max: f64,
    pub grid: usize,
    pub series: SeriesOptions,
}

impl Default for MSearch {
    fn default() -> Self {
        Self {
            x_min: 1e-3,
            x_max: 1e6,
            grid: 200,
            series: SeriesOptions::default(),
        }
    }
}

/// Log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..count)
        .map(|j| (l0 + (l1 - l0) * j as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Estimates `m = sup_x F(x)` by a log-grid scan followed by golden-section
/// refinement around the best cell.
pub fn estimate_m(params: &PowerLawParams, search: MSearch) -> Result<MEstimate> {
    let verdict = classify_regime(params)?;
    if verdict.regime == Regime::AlwaysExists {
        return Err(Error::NoFiniteThreshold);
    }
    if !(search.x_min > 0.0 && search.x_max > search.x_min && search.grid >= 3) {
        return Err(invalid("need 0 < x_min < x_max and at least 3 grid points"));
    }
    let fam = CoefficientFamily::power_law(*params)?;
    let f = |x: f64| f_equilibrium(&fam, x, search.series);
    let xs = log_grid(search.x_min, search.x_max, search.grid);
    let vals = xs.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let best = (0..vals.len())
        .max_by(|&i, &j| vals[i].value.total_cmp(&vals[j].value))
        .expect("nonempty grid");
    let last = xs.len() - 1;

    if best == last {
        if verdict.regime == Regime::ThresholdWeak {
            return Err(Error::NonConvergence { x_max: search.x_max });
        }
        // F(x) ~ m - C x^(-1/(a+1)); extrapolate from the last two points
        let e = 1.0 / (verdict.a + 1.0);
        let (f1, f2) = (vals[last - 1].value, vals[last].value);
        let q = (xs[last] / xs[last - 1]).powf(e);
        let extrapolated = f2 + (f2 - f1) / (q - 1.0);
        return Ok(MEstimate {
            m: f2,
            error_bar: (extrapolated - f2).abs() + vals[last].tail_bound,
            attained_at: Attainment::SupremumAtInfinity,
        });
    }

    let lo = xs[best.saturating_sub(1)].ln();
    let hi = xs[(best + 1).min(last)].ln();
    let g = |u: f64| f(u.exp()).map(|v| v.value);
    let (u_best, _) = golden_section_max(g, lo, hi, 1e-10)?;
    let x_best = u_best.exp();
    let center = f(x_best)?;
    // spread of F over the final golden-section bracket
    let h = 1e-10 * (hi - lo).max(1.0);
    let spread = [u_best - h, u_best + h]
        .iter()
        .map(|&u| f(u.exp()).map(|v| (v.value - center.value).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let m = center.value.max(vals[best].value);
    Ok(MEstimate {
        m,
        error_bar: spread + center.tail_bound + 16.0 * f64::EPSILON * m,
        attained_at: Attainment::At(x_best),
    })
}

fn golden_section_max(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

fn decide(regime: Regime, est: Option<&MEstimate>, alpha_over_r: f64) -> Existence {
    let Some(est) = est else {
        return match regime {
            Regime::AlwaysExists => Existence::Exists,
            _ => Existence::AtThreshold,
        };
    };
    if regime == Regime::AlwaysExists {
        return Existence::Exists;
    }
    if (alpha_over_r - est.m).abs() <= est.error_bar {
        return Existence::AtThreshold;
    }
    if alpha_over_r < est.m {
        Existence::Exists
    } else {
        Existence::NotExists
    }
}

/// Whether `alpha / r = F(x)` has a solution, estimating `m` where needed.
pub fn existence_verdict(params: &PowerLawParams, alpha: f64, r: f64, search: MSearch) -> Result<(RegimeVerdict, Existence)> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(r > 0.0 && r.is_finite()) {
        return Err(invalid("alpha and r must be positive"));
    }
    let mut verdict = classify_regime(params)?;
    if verdict.regime != Regime::AlwaysExists {
        verdict.m_estimate = Some(estimate_m(params, search)?);
    }
    let e = verdict.existence(alpha / r);
    Ok((verdict, e))
}

/// Heuristic root count: sign changes of `F - alpha/r` on the given grid.
/// Roots closer together than the grid spacing are missed.
pub fn root_count_probe(params: &PowerLawParams, alpha_over_r: f64, xs: &[f64], opts: SeriesOptions) -> Result<usize> {
    let fam = CoefficientFamily::power_law(*params)?;
    let signs = xs
        .iter()
        .map(|&x| f_equilibrium(&fam, x, opts).map(|v| v.value > alpha_over_r))
        .collect::<Result<Vec<_>>>()?;
    Ok(signs.windows(2).filter(|w| w[0] != w[1]).count())
}

/// Second differences of `H` in `ln x` on the given grid: an exploratory
/// convexity probe, not a proof of anything.
pub fn second_difference_probe(params: &PowerLawParams, xs: &[f64], opts: SeriesOptions) -> Result<Vec<f64>> {
    let fam = CoefficientFamily::power_law(*params)?;
    let h = xs
        .iter()
        .map(|&x| h_series(&fam, x, opts).map(|v| v.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(h.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64) -> PowerLawParams {
        PowerLawParams::from_ab(a, b).unwrap()
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_ab(1.0, 1.0).unwrap(), Regime::AlwaysExists);
        assert_eq!(classify_ab(2.0, 1.0).unwrap(), Regime::ThresholdStrict);
        assert_eq!(classify_ab(2.0, 0.0).unwrap(), Regime::ThresholdWeak);
        assert_eq!(classify_ab(2.0, 1.0 + 1e-13).unwrap(), Regime::ThresholdStrict);
        assert_eq!(classify_ab(2.0, 1.0 + 1e-9).unwrap(), Regime::AlwaysExists);
        assert!(classify_ab(1.0, -2.0).is_err());
    }

    #[test]
    fn exponent_gap_matches_regime() {
        // (b+2)/(a+1) - 1 = (b - (a-1))/(a+1)
        for &(a, b) in &[(1.0, 1.0), (2.0, 1.0), (2.0, 0.0), (0.5, -0.9), (3.0, 2.5)] {
            let gap = (b + 2.0) / (a + 1.0) - 1.0;
            let expected = match classify_ab(a, b).unwrap() {
                Regime::AlwaysExists => gap > 0.0,
                Regime::ThresholdStrict => gap.abs() <= 1e-12,
                Regime::ThresholdWeak => gap < 0.0,
            };
            assert!(expected, "a={a} b={b}");
        }
    }

    #[test]
    fn always_exists_has_no_threshold() {
        assert_eq!(estimate_m(&params(1.0, 1.0), MSearch::default()), Err(Error::NoFiniteThreshold));
        let (_, e) = existence_verdict(&params(1.0, 1.0), 1e6, 1.0, MSearch::default()).unwrap();
        assert_eq!(e, Existence::Exists);
    }

    #[test]
    fn weak_regime_interior_max() {
        let est = estimate_m(&params(2.0, 0.0), MSearch::default()).unwrap();
        let Attainment::At(x_star) = est.attained_at else {
            panic!("expected an interior maximum");
        };
        assert!(x_star > 1e-3 && x_star < 1e6);
        let fam = CoefficientFamily::power_law(params(2.0, 0.0)).unwrap();
        for &x in &[x_star / 3.0, x_star * 3.0] {
            assert!(f_equilibrium(&fam, x, SeriesOptions::default()).unwrap().value < est.m);
        }
        let doubled = estimate_m(&params(2.0, 0.0), MSearch { grid: 400, ..MSearch::default() }).unwrap();
        assert!((doubled.m - est.m).abs() <= 0.01 * est.m);
    }

    #[test]
    fn weak_regime_needs_room() {
        let err = estimate_m(&params(2.0, 0.0), MSearch { x_max: 1e-2, ..MSearch::default() }).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn verdicts_around_threshold() {
        let weak = params(2.0, 0.0);
        let est = estimate_m(&weak, MSearch::default()).unwrap();
        let (_, e) = existence_verdict(&weak, 2.0 * est.m, 1.0, MSearch::default()).unwrap();
        assert_eq!(e, Existence::NotExists);
        let (_, e) = existence_verdict(&weak, 0.5 * est.m, 1.0, MSearch::default()).unwrap();
        assert_eq!(e, Existence::Exists);

        let strict = params(2.0, 1.0);
        let est = estimate_m(&strict, MSearch::default()).unwrap();
        let (_, e) = existence_verdict(&strict, 0.5 * est.m, 1.0, MSearch::default()).unwrap();
        assert_eq!(e, Existence::Exists);
    }

    #[test]
    fn root_probe_counts_two_crossings_below_max() {
        let weak = params(2.0, 0.0);
        let est = estimate_m(&weak, MSearch::default()).unwrap();
        let xs = log_grid(1e-3, 1e5, 300);
        assert_eq!(root_count_probe(&weak, 0.5 * est.m, &xs, SeriesOptions::default()).unwrap(), 2);
        assert_eq!(root_count_probe(&weak, 1.5 * est.m, &xs, SeriesOptions::default()).unwrap(), 0);
        let d2 = second_difference_probe(&weak, &xs[..20], SeriesOptions::default()).unwrap();
        assert_eq!(d2.len(), 18);
    }
}
