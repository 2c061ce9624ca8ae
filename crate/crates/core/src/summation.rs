//! Compensated accumulation and the certified-value wrapper returned by every
//! infinite-series evaluator.

use serde::{Deserialize, Serialize};

/// Neumaier (improved Kahan–Babuška) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// A truncated series value with a rigorous bound on the omitted tail.
///
/// All series in this crate have nonnegative terms past the truncation
/// point, so the exact sum lies in `[value, value + tail_bound]` up to
/// floating-point rounding of the retained terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

impl BoundedValue {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            tail_bound: 0.0,
            terms_used: 0,
        }
    }

    /// Upper end of the certified enclosure.
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }

    /// Whether `other` lies in `[value, value + tail_bound]`, with `slack`
    /// added on both sides for rounding.
    pub fn encloses(&self, other: f64, slack: f64) -> bool {
        other >= self.value - slack && other <= self.upper() + slack
    }

    pub(crate) fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            tail_bound: self.tail_bound * factor.abs(),
            terms_used: self.terms_used,
        }
    }
}
