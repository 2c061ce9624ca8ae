//! Size of `K_{a,b}(x)` beyond the cutoff `i > x^(3/(3a+2))`, and the
//! stretched-exponential envelope `K exp(-c x^(1/(3a+1)))` fitted to it.

use serde::Serialize;

use crate::coefficients::Envelope;
use crate::error::{invalid, Result};
use crate::product_series::{tail_after, FnSeries};
use crate::summation::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCheck {
    pub x: f64,
    pub cutoff_index: usize,
    /// `sum_{i > cutoff} i^(b+1) P_i(x)`, summed to the term cap.
    pub tail_sum: f64,
    /// Certified bound on what the direct tail sum left out.
    pub tail_bound: f64,
    /// The full `K_{a,b}(x)`.
    pub total: f64,
}

impl TailCheck {
    pub fn ratio(&self) -> f64 {
        self.tail_sum / self.total
    }
}

/// `ceil(x^(3/(3a+2)))`.
pub fn cutoff_index(a: f64, x: f64) -> usize {
    x.powf(3.0 / (3.0 * a + 2.0)).ceil() as usize
}

/// Computes the cutoff and the directly summed tail above it.
pub fn tail_cutoff_check(a: f64, b: f64, x: f64, cap: usize) -> Result<TailCheck> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    if !(x >= 1.0 && x.is_finite()) {
        return Err(invalid(format!("x must be at least 1, got {x}")));
    }
    let series = FnSeries {
        shift: |j: usize| (j as f64).powf(a),
        lower: |i: usize| ((i + 1) as f64).powf(a),
        weight: |i: usize| (i as f64).powf(b + 1.0),
        envelope: |_| Envelope {
            weight: 1.0,
            exponent: b + 1.0,
        },
    };
    let cutoff = cutoff_index(a, x);
    let mut head = CompensatedSum::new();
    let mut tail = CompensatedSum::new();
    let mut p = 1.0;
    let mut i = 0usize;
    // sum until the remaining terms are below the last ulp of the tail
    loop {
        i += 1;
        p *= x / (x + (i as f64).powf(a));
        let term = (i as f64).powf(b + 1.0) * p;
        if i <= cutoff {
            head.add(term);
        } else {
            tail.add(term);
            let rest = tail_after(&series, x, i, p, cap)?;
            if rest <= 1e-17 * tail.value() || i >= cap {
                let tail_sum = tail.value();
                return Ok(TailCheck {
                    x,
                    cutoff_index: cutoff,
                    tail_sum,
                    tail_bound: rest,
                    total: head.value() + tail_sum,
                });
            }
        }
    }
}

/// `K exp(-c x^(1/(3a+1)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEnvelope {
    pub a: f64,
    pub k: f64,
    pub c: f64,
}

impl TailEnvelope {
    pub fn eval(&self, x: f64) -> f64 {
        self.k * (-self.c * x.powf(1.0 / (3.0 * self.a + 1.0))).exp()
    }
}

/// Least-squares fit of `ln tail = ln K - c x^(1/(3a+1))` over `xs`, with `K`
/// raised afterwards so the envelope dominates every fitted point.
pub fn fit_envelope(a: f64, b: f64, xs: &[f64], cap: usize) -> Result<TailEnvelope> {
    if xs.len() < 2 {
        return Err(invalid("envelope fit needs at least two points"));
    }
    let exponent = 1.0 / (3.0 * a + 1.0);
    let pts = xs
        .iter()
        .map(|&x| Ok((x.powf(exponent), tail_cutoff_check(a, b, x, cap)?.tail_sum.ln())))
        .collect::<Result<Vec<_>>>()?;
    let n = pts.len() as f64;
    let mean_u = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_l = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_u) * (p.1 - mean_l)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_u).powi(2)).sum();
    let slope = sxy / sxx;
    let c = -slope;
    let ln_k = pts.iter().map(|&(u, l)| l + c * u).fold(f64::NEG_INFINITY, f64::max);
    Ok(TailEnvelope { a, k: ln_k.exp(), c })
}
