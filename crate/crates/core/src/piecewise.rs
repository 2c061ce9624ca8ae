//! Exact analysis of the piecewise-constant family.
//!
//! With `y = x / (x + 1/k)` the equilibrium function is
//!
//! ```text
//!     F_{N,k}(x) = k x (1 - y^{N+1}) - (N + 1) y^{N+1}
//!                = y (1 - y) sum_{j=0..N-1} (j + 1) y^j,
//! ```
//!
//! the second form following from `1 - (N+1) y^N + N y^{N+1} =
//! (1 - y)^2 sum_j (j+1) y^j`.  It has no cancellation, so it is used for
//! moderate `N`; the `expm1`/`log1p` form covers very large `N`.
//!
//! `F` rises from 0, has a single interior maximum at the root of
//! `p_N(y) = 1 - (N+1)^2 y^N + N(2N+3) y^{N+1} - N(N+1) y^{N+2}` in
//! `(0, (N+1)/(N+2))`, and decays back to 0.  Hence `alpha / r = F(x)` has
//! two, one or no solutions depending on `alpha / r` against `max F`.

use serde::{Deserialize, Serialize};

use crate::coefficients::PiecewiseConstantParams;
use crate::error::{invalid, Error, Result};

/// Above this `N` the `O(N)` positive-term sum gives way to the closed form.
const DIRECT_SUM_MAX_N: usize = 4096;

/// `F_{N,k}(x)`.
pub fn f_piecewise(params: &PiecewiseConstantParams, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let kx = params.k * x;
    // y = kx / (kx + 1), 1 - y = 1 / (kx + 1)
    let one_minus_y = 1.0 / (kx + 1.0);
    let y = kx * one_minus_y;
    let n = params.n;
    if n == 0 {
        return 0.0;
    }
    if n <= DIRECT_SUM_MAX_N {
        // Horner for sum_{j=0..N-1} (j+1) y^j
        let mut acc = 0.0;
        for j in (0..n).rev() {
            acc = acc * y + (j + 1) as f64;
        }
        y * one_minus_y * acc
    } else {
        let log_y = -(1.0 / kx).ln_1p();
        let l = (n as f64 + 1.0) * log_y;
        let y_pow = l.exp();
        kx * (-l.exp_m1()) - (n as f64 + 1.0) * y_pow
    }
}

/// `(y / (1 - y)) (1 - (N+1) y^N + N y^{N+1})`, the substituted form of `F`.
pub fn f_tilde(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    y / (1.0 - y) * (1.0 - (nf + 1.0) * y.powi(n as i32) + nf * y.powi(n as i32 + 1))
}

/// `p_N(y)`, whose sign is the sign of `dF/dx`.
///
/// Evaluated as `(1 - y)^2 g(y)` with
/// `g(y) = sum_{m<N} (m+1) y^m - N(N+1) y^N`; the expanded coefficients are
/// of size `N^2` and cancel badly near the root.
pub fn p_poly(n: usize, y: f64) -> f64 {
    (1.0 - y) * (1.0 - y) * g_poly(n, y)
}

fn g_poly(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    let mut acc = -nf * (nf + 1.0);
    for m in (0..n).rev() {
        acc = acc * y + (m + 1) as f64;
    }
    acc
}

/// Location and value of the maximum of `F_{N,k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub x_star: f64,
    #[serde(rename = "F_max")]
    pub f_max: f64,
    /// The root `y*` of `p_N` in `(0, (N+1)/(N+2))`.
    pub y_star: f64,
}

/// Finds the unique stationary point by bisection on `p_N`.
pub fn stationary_point(params: &PiecewiseConstantParams) -> Result<StationaryPoint> {
    params.validate()?;
    let n = params.n;
    if n == 0 {
        return Err(Error::DegenerateCutoff);
    }
    let mut lo = 0.0;
    let mut hi = (n as f64 + 1.0) / (n as f64 + 2.0);
    debug_assert!(g_poly(n, hi) < 0.0);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g_poly(n, mid);
        if v == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller residual
    let y_star = if g_poly(n, lo).abs() <= g_poly(n, hi).abs() { lo } else { hi };
    let x_star = y_star / params.k / (1.0 - y_star);
    Ok(StationaryPoint {
        x_star,
        f_max: f_piecewise(params, x_star),
        y_star,
    })
}

/// `alpha* = r max F`: above it no equilibrium exists.
pub fn alpha_star(params: &PiecewiseConstantParams, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid(format!("r must be positive, got {r}")));
    }
    Ok(r * stationary_point(params)?.f_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStatus {
    /// Count is certified by the sign structure of `F`.
    Resolved,
    /// `alpha / r` is within the resolution tolerance of `max F`; the tangency
    /// root is reported but the count is ambiguous at working precision.
    NearThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub bracket: [f64; 2],
    pub refined: f64,
}

/// Solution set of `alpha / r = F_{N,k}(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub alpha_over_r: f64,
    pub threshold_m: f64,
    pub count: u8,
    pub roots: Vec<Root>,
    pub stationary_point: StationaryPoint,
    pub status: RootStatus,
}

/// Solves `alpha / r = F_{N,k}(x)` by bisection on certified brackets.
///
/// `tol` is the absolute tolerance on `F` at the refined roots (relative to
/// `max(1, x)` on `x` itself); `alpha / r` within `10 tol` of `max F`
/// (relative) is reported as a single tangency root.
pub fn solve_roots(params: &PiecewiseConstantParams, alpha: f64, r: f64, tol: f64) -> Result<RootReport> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid(format!("r must be positive, got {r}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(invalid(format!("tol must be positive, got {tol}")));
    }
    let sp = stationary_point(params)?;
    let target = alpha / r;
    let resolution = 10.0 * tol * sp.f_max;
    let mut report = RootReport {
        alpha_over_r: target,
        threshold_m: sp.f_max,
        count: 0,
        roots: Vec::new(),
        stationary_point: sp,
        status: RootStatus::Resolved,
    };
    if (target - sp.f_max).abs() <= resolution {
        report.count = 1;
        report.status = RootStatus::NearThreshold;
        report.roots.push(Root {
            bracket: [sp.x_star, sp.x_star],
            refined: sp.x_star,
        });
        return Ok(report);
    }
    if target > sp.f_max {
        return Ok(report);
    }

    let g = |x: f64| f_piecewise(params, x) - target;
    // increasing branch: g(0) < 0 < g(x*)
    let lower = bisect(&g, 0.0, sp.x_star, tol);
    // decreasing branch: grow the upper end until F drops below the target
    let mut hi = 2.0 * sp.x_star.max(1.0 / params.k);
    while g(hi) >= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NonConvergence { x_max: hi });
        }
    }
    let upper = bisect(&g, sp.x_star, hi, tol);
    report.count = 2;
    report.roots = vec![lower, upper];
    Ok(report)
}

/// Bisection on a bracket with `sign(g(lo)) != sign(g(hi))`.
fn bisect(g: &impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Root {
    let (a0, b0) = (lo, hi);
    let (mut a, mut b) = (lo, hi);
    let ga_neg = g(a) < 0.0;
    loop {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if (gm < 0.0) == ga_neg {
            a = mid;
        } else {
            b = mid;
        }
        let width_ok = b - a <= tol * mid.abs().max(1.0);
        if width_ok && g(a).abs() <= tol && g(b).abs() <= tol {
            break;
        }
    }
    let refined = if g(a).abs() <= g(b).abs() { a } else { b };
    Root {
        bracket: [a0, b0],
        refined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: f64, n: usize) -> PiecewiseConstantParams {
        PiecewiseConstantParams::new(k, n).unwrap()
    }

    #[test]
    fn f_examples() {
        let p = params(1.0, 1);
        assert_eq!(f_piecewise(&p, 0.0), 0.0);
        assert!((f_piecewise(&p, 1.0) - 0.25).abs() <= f64::EPSILON);
        assert!(f_piecewise(&p, 1e6).abs() <= 1e-5);
    }

    #[test]
    fn both_evaluation_routes_agree() {
        for &(k, n) in &[(1.0, 1), (0.4, 7), (3.0, 50)] {
            let small = params(k, n);
            for &x in &[0.01, 0.3, 1.0, 4.0, 25.0] {
                let direct = f_piecewise(&small, x);
                let kx = k * x;
                let l = (n as f64 + 1.0) * -(1.0 / kx).ln_1p();
                let closed = kx * (-l.exp_m1()) - (n as f64 + 1.0) * l.exp();
                assert!((direct - closed).abs() <= 1e-12 * (n as f64 + 1.0), "k={k} N={n} x={x}");
            }
        }
        let big = params(1.0, 10_000);
        let v = f_piecewise(&big, 500.0);
        assert!(v > 0.0 && v < 500.0);
    }

    #[test]
    fn factored_polynomial_matches_expanded() {
        for n in [1usize, 2, 5, 9] {
            let nf = n as f64;
            for &y in &[0.1f64, 0.37, 0.6, 0.9] {
                let yn = y.powi(n as i32);
                let expanded = 1.0 - (nf + 1.0).powi(2) * yn + nf * (2.0 * nf + 3.0) * yn * y - nf * (nf + 1.0) * yn * y * y;
                assert!((p_poly(n, y) - expanded).abs() <= 1e-13, "N={n} y={y}");
            }
        }
        // p_1 = (1 - 2y)(1 - y)^2
        assert!((p_poly(1, 0.3) - 0.4 * 0.49).abs() <= 1e-15);
    }

    #[test]
    fn n1_stationary_point_is_exact() {
        let sp = stationary_point(&params(1.0, 1)).unwrap();
        assert_eq!(sp.y_star, 0.5);
        assert!((sp.x_star - 1.0).abs() <= 1e-15);
        assert!((sp.f_max - 0.25).abs() <= 1e-15);
    }

    #[test]
    fn stationary_root_residual_and_location() {
        for n in 1..=50 {
            let sp = stationary_point(&params(1.0, n)).unwrap();
            assert!(p_poly(n, sp.y_star).abs() <= 1e-14, "N={n}: {}", p_poly(n, sp.y_star));
            assert!(sp.y_star < (n as f64 + 1.0) / (n as f64 + 2.0));
            assert!(sp.y_star > 0.0);
        }
    }

    #[test]
    fn degenerate_cutoff_rejected() {
        assert_eq!(stationary_point(&params(1.0, 0)), Err(Error::DegenerateCutoff));
        assert!(solve_roots(&params(1.0, 0), 0.1, 1.0, 1e-12).is_err());
        assert_eq!(f_piecewise(&params(2.0, 0), 3.0), 0.0);
    }

    #[test]
    fn alpha_star_scales_with_r() {
        let p = params(1.0, 1);
        assert!((alpha_star(&p, 1.0).unwrap() - 0.25).abs() <= 1e-15);
        assert!((alpha_star(&p, 4.0).unwrap() - 1.0).abs() <= 1e-15);
        let q = params(2.3, 6);
        let base = alpha_star(&q, 1.0).unwrap();
        assert!((alpha_star(&q, 3.5).unwrap() - 3.5 * base).abs() <= 1e-14 * base);
    }

    #[test]
    fn trichotomy_n1() {
        let p = params(1.0, 1);
        let at = solve_roots(&p, 0.25, 1.0, 1e-12).unwrap();
        assert_eq!(at.count, 1);
        assert!((at.roots[0].refined - 1.0).abs() <= 1e-10);
        assert_eq!(solve_roots(&p, 0.3, 1.0, 1e-12).unwrap().count, 0);
        let two = solve_roots(&p, 0.2, 1.0, 1e-12).unwrap();
        assert_eq!(two.count, 2);
        assert_eq!(two.status, RootStatus::Resolved);
        assert!(two.roots[0].refined < 1.0 && two.roots[1].refined > 1.0);
        for root in &two.roots {
            assert!((f_piecewise(&p, root.refined) - 0.2).abs() <= 1e-12);
        }
    }

    #[test]
    fn report_json_field_names() {
        let rep = solve_roots(&params(1.0, 1), 0.2, 1.0, 1e-12).unwrap();
        let text = toml::to_string(&rep).unwrap();
        for key in ["alpha_over_r", "threshold_m", "count", "x_star", "F_max", "bracket", "refined"] {
            assert!(text.contains(key), "missing {key}");
        }
    }
}
