//! Batch evaluation of a series over a grid of `x` values.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::summation::BoundedValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min >= 0.0 && self.x_max >= self.x_min) {
            return Err(invalid(format!("bad grid range [{}, {}]", self.x_min, self.x_max)));
        }
        if self.count == 0 {
            return Err(invalid("grid needs at least one point"));
        }
        if self.spacing == Spacing::Log && self.x_min <= 0.0 {
            return Err(invalid("log spacing needs x_min > 0"));
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        if self.count == 1 {
            return Ok(vec![self.x_min]);
        }
        let steps = (self.count - 1) as f64;
        let pts = (0..self.count).map(|j| {
            let t = j as f64 / steps;
            match self.spacing {
                Spacing::Linear => self.x_min + (self.x_max - self.x_min) * t,
                Spacing::Log => (self.x_min.ln() + (self.x_max.ln() - self.x_min.ln()) * t).exp(),
            }
        });
        let mut out: Vec<f64> = pts.collect();
        // pin the endpoints against rounding in exp/ln
        out[0] = self.x_min;
        out[self.count - 1] = self.x_max;
        Ok(out)
    }
}

/// One CSV row: `x, value, tail_bound, terms_used`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub x: f64,
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

pub const GRID_CSV_HEADER: [&str; 4] = ["x", "value", "tail_bound", "terms_used"];

/// Evaluates `f` at every grid point.
pub fn evaluate_grid(spec: &GridSpec, f: impl Fn(f64) -> Result<BoundedValue>) -> Result<Vec<GridRow>> {
    spec.points()?
        .into_iter()
        .map(|x| {
            let v = f(x)?;
            Ok(GridRow {
                x,
                value: v.value,
                tail_bound: v.tail_bound,
                terms_used: v.terms_used,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_log_points() {
        let lin = GridSpec { x_min: 0.0, x_max: 1.0, count: 5, spacing: Spacing::Linear };
        assert_eq!(lin.points().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let log = GridSpec { x_min: 1.0, x_max: 1e4, count: 5, spacing: Spacing::Log };
        let pts = log.points().unwrap();
        assert_eq!(pts[0], 1.0);
        assert_eq!(pts[4], 1e4);
        assert!((pts[2] - 100.0).abs() <= 1e-12);
        assert!(GridSpec { x_min: 0.0, ..log }.points().is_err());
    }

    #[test]
    fn rows_carry_bounds() {
        let spec = GridSpec { x_min: 1.0, x_max: 2.0, count: 2, spacing: Spacing::Linear };
        let rows = evaluate_grid(&spec, |x| Ok(BoundedValue { value: 2.0 * x, tail_bound: 1e-13, terms_used: 7 })).unwrap();
        assert_eq!(rows[1].value, 4.0);
        assert_eq!(rows[0].terms_used, 7);
    }
}
