//! Large-`x` and small-`v` expansions of the power-law series.
//!
//! * [`r_series`]: `R(a, A; v) = sum_i exp(-v i^(a+1)) i^A`, directly and by
//!   its Mellin-residue expansion,
//! * [`power_sums`]: `sum_{j<=n} j^a` by Euler–Maclaurin,
//! * [`k_series`]: `K_{a,b}`, `H_{a,b}` and their expansions,
//! * [`tail`]: the above-cutoff tail of `K_{a,b}`.

use serde::{Deserialize, Serialize};

pub mod k_series;
pub mod power_sums;
pub mod r_series;
pub mod tail;

pub use k_series::{h10_closed_form, h_direct, k_direct, k_expansion_refined, k_leading_asymptotics};
pub use power_sums::{power_sum, power_sum_exact, PowerSum};
pub use r_series::{r_expansion, r_sum_direct};
pub use tail::{fit_envelope, tail_cutoff_check, TailCheck, TailEnvelope};

/// Exponent tolerance for merging terms and detecting Gamma poles.
pub(crate) const EXPONENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// Terms `c x^p (ln x)^m`, `x -> oo`.
    XToInfinity,
    /// Terms `c v^p (ln 1/v)^m`, `v -> 0`.
    VToZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub power: f64,
    pub log_power: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Remainder {
    pub power: f64,
    pub log_power: i32,
}

/// A finite asymptotic expansion with the order of its remainder.
///
/// The log factor is `ln x` for [`Variable::XToInfinity`] and `ln(1/v)` for
/// [`Variable::VToZero`], so it is positive in the asymptotic regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticExpansion {
    pub variable: Variable,
    pub terms: Vec<Term>,
    pub remainder: Remainder,
}

impl AsymptoticExpansion {
    /// Builds an expansion, merging equal orders, dropping zero
    /// coefficients, and sorting by dominance.
    pub fn new(variable: Variable, terms: Vec<Term>, remainder: Remainder) -> Self {
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged
                .iter_mut()
                .find(|m| m.log_power == t.log_power && (m.power - t.power).abs() <= EXPONENT_TOL)
            {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        let mut exp = Self {
            variable,
            terms: merged,
            remainder,
        };
        exp.sort();
        exp
    }

    fn sort(&mut self) {
        let var = self.variable;
        self.terms.sort_by(|l, r| {
            let by_power = match var {
                Variable::XToInfinity => r.power.total_cmp(&l.power),
                Variable::VToZero => l.power.total_cmp(&r.power),
            };
            by_power.then(r.log_power.cmp(&l.log_power))
        });
    }

    /// Sum of all stored terms at `t` (`x` or `v`).
    pub fn eval(&self, t: f64) -> f64 {
        let log = match self.variable {
            Variable::XToInfinity => t.ln(),
            Variable::VToZero => -t.ln(),
        };
        crate::summation::compensated_sum(
            self.terms
                .iter()
                .map(|term| term.coeff * t.powf(term.power) * log.powi(term.log_power as i32)),
        )
    }

    /// Coefficient of `t^power (log)^log_power`, zero if absent.
    pub fn coefficient(&self, power: f64, log_power: u32) -> f64 {
        self.terms
            .iter()
            .find(|t| t.log_power == log_power && (t.power - power).abs() <= EXPONENT_TOL)
            .map_or(0.0, |t| t.coeff)
    }
}
