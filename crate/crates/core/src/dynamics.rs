//! Time integration of the cohort system truncated at `i_max`:
//!
//! ```text
//!     M_0' = r - k_0 x M_0 - (p_0 + q_0) M_0
//!     M_i' = k_{i-1} x M_{i-1} - k_i x M_i - (p_i + q_i) M_i,      1 <= i <= i_max
//!     x'   = alpha - x sum_{i<=i_max} k_i M_i + sum_{i<=i_max} i q_i M_i
//! ```
//!
//! Cells of the top cohort that phagocytose leave the system with their
//! load.  Together with the escalator clearance this gives
//!
//! ```text
//!     d/dt (x + sum_i i M_i) = alpha - sum_i i p_i M_i - (i_max + 1) k_{i_max} x M_{i_max},
//! ```
//!
//! and both loss terms are integrated alongside the state so the balance can
//! be audited.  The integrator is Dormand–Prince 5(4) with step-size control.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientFamily;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_I_MAX: usize = 200;

/// `||rhs||_inf` below which the state counts as stationary.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-10;

/// Consecutive accepted steps below the threshold needed for convergence.
pub const CONVERGENCE_STEPS: usize = 100;

/// Absolute part of the error scale, relative to the tolerance.
const ABS_FLOOR: f64 = 1e-4;

/// Most negative component tolerated along a trajectory.
pub const NEGATIVITY_TOL: f64 = -1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub x: f64,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    /// Load removed through the top cohort, `int (i_max+1) k_{i_max} x M_{i_max} dt`.
    pub flux_log: f64,
    /// Load removed by the escalator, `int sum_i i p_i M_i dt`.
    pub clearance_log: f64,
}

impl SystemState {
    /// Empty lung: no quartz, no cells.
    pub fn zero(i_max: usize) -> Self {
        Self {
            t: 0.0,
            x: 0.0,
            m: vec![0.0; i_max + 1],
            flux_log: 0.0,
            clearance_log: 0.0,
        }
    }

    pub fn i_max(&self) -> usize {
        self.m.len() - 1
    }

    pub fn total_cells(&self) -> f64 {
        crate::summation::compensated_sum(self.m.iter().copied())
    }

    /// Quartz held inside cells, `sum_i i M_i`.
    pub fn total_load(&self) -> f64 {
        crate::summation::compensated_sum(self.m.iter().enumerate().map(|(i, m)| i as f64 * m))
    }

    /// `x + sum_i i M_i + clearance_log + flux_log`; grows exactly like `alpha t`.
    pub fn balance(&self) -> f64 {
        self.x + self.total_load() + self.clearance_log + self.flux_log
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.m.len() + 3);
        y.push(self.x);
        y.extend_from_slice(&self.m);
        y.push(self.clearance_log);
        y.push(self.flux_log);
        y
    }

    fn from_vec(t: f64, y: &[f64]) -> Self {
        let n = y.len();
        Self {
            t,
            x: y[0],
            m: y[1..n - 2].to_vec(),
            clearance_log: y[n - 2],
            flux_log: y[n - 1],
        }
    }
}

/// Time derivative of a [`SystemState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDerivative {
    pub dx: f64,
    #[serde(rename = "dM")]
    pub dm: Vec<f64>,
    pub d_clearance: f64,
    pub d_flux: f64,
}

impl StateDerivative {
    /// `max(|x'|, |M_i'|)`.
    pub fn norm_inf(&self) -> f64 {
        self.dm.iter().fold(self.dx.abs(), |acc, v| acc.max(v.abs()))
    }
}

/// Rate tables for `i = 0..=i_max`.
struct Rates {
    k: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl Rates {
    fn new(fam: &CoefficientFamily, i_max: usize) -> Self {
        Self {
            k: (0..=i_max).map(|i| fam.k(i)).collect(),
            p: (0..=i_max).map(|i| fam.p(i)).collect(),
            q: (0..=i_max).map(|i| fam.q(i)).collect(),
        }
    }

    fn eval(&self, alpha: f64, r: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.k.len();
        let x = y[0];
        let m = &y[1..=n];
        let mut uptake = 0.0;
        let mut release = 0.0;
        let mut clearance = 0.0;
        for i in 0..n {
            let inflow = if i == 0 { r } else { self.k[i - 1] * x * m[i - 1] };
            dy[1 + i] = inflow - (self.k[i] * x + self.p[i] + self.q[i]) * m[i];
            uptake += self.k[i] * m[i];
            release += i as f64 * self.q[i] * m[i];
            clearance += i as f64 * self.p[i] * m[i];
        }
        dy[0] = alpha - x * uptake + release;
        dy[n + 1] = clearance;
        dy[n + 2] = n as f64 * self.k[n - 1] * x * m[n - 1];
    }
}

/// Right-hand side of the truncated system at `state`.
pub fn rhs(fam: &CoefficientFamily, alpha: f64, r: f64, state: &SystemState) -> Result<StateDerivative> {
    if state.m.len() < 2 {
        return Err(invalid("i_max must be at least 1"));
    }
    let rates = Rates::new(fam, state.i_max());
    let y = state.to_vec();
    let mut dy = vec![0.0; y.len()];
    rates.eval(alpha, r, &y, &mut dy);
    let n = dy.len();
    Ok(StateDerivative {
        dx: dy[0],
        dm: dy[1..n - 2].to_vec(),
        d_clearance: dy[n - 2],
        d_flux: dy[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// Per-step local error tolerance, absolute and relative.
    pub tol: f64,
    /// Stop once converged instead of running to `t_end`.
    pub stop_on_convergence: bool,
    /// Record a sample every this many accepted steps (0: none).
    pub sample_every: usize,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            stop_on_convergence: true,
            sample_every: 0,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub total_cells: f64,
    pub total_load: f64,
    pub rhs_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub final_state: SystemState,
    /// Most negative state component seen (zero if none).
    pub max_constraint_violation: f64,
    pub converged: bool,
    pub converged_at: Option<f64>,
    pub final_rhs_norm: f64,
    /// `max_t |balance(t) - balance(0) - alpha t|`.
    pub conservation_drift: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub samples: Vec<Sample>,
}

// Dormand–Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates from `initial` to `t_end`.
pub fn integrate(
    fam: &CoefficientFamily,
    alpha: f64,
    r: f64,
    initial: &SystemState,
    t_end: f64,
    opts: IntegrateOptions,
) -> Result<TrajectorySummary> {
    if !(alpha >= 0.0 && alpha.is_finite() && r >= 0.0 && r.is_finite()) {
        return Err(invalid("alpha and r must be finite and nonnegative"));
    }
    if initial.m.len() < 2 {
        return Err(invalid("i_max must be at least 1"));
    }
    if !(t_end > initial.t) || !(opts.tol > 0.0) {
        return Err(invalid("need t_end > t0 and a positive tolerance"));
    }
    let rates = Rates::new(fam, initial.i_max());
    let dim = initial.m.len() + 3;
    let mut y = initial.to_vec();
    let mut t = initial.t;
    let balance0 = initial.balance();
    let t0 = initial.t;

    let mut k = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    rates.eval(alpha, r, &y, &mut k[0]);

    let state_norm = |dy: &[f64]| dy[..dim - 2].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut h = initial_step(&y, &k[0], opts.tol);
    let mut summary = TrajectorySummary {
        final_state: initial.clone(),
        max_constraint_violation: 0.0,
        converged: false,
        converged_at: None,
        final_rhs_norm: state_norm(&k[0]),
        conservation_drift: 0.0,
        accepted_steps: 0,
        rejected_steps: 0,
        samples: Vec::new(),
    };
    let mut quiet_steps = 0usize;

    while t < t_end {
        if summary.accepted_steps + summary.rejected_steps >= opts.max_steps {
            return Err(invalid(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
        }
        h = h.min(t_end - t);
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }
        for s in 1..7 {
            for j in 0..dim {
                let mut acc = 0.0;
                for (l, a) in A[s][..s].iter().enumerate() {
                    acc += a * k[l][j];
                }
                y_stage[j] = y[j] + h * acc;
            }
            rates.eval(alpha, r, &y_stage, &mut k[s]);
        }
        // stage 6 evaluates at the fifth-order solution
        let mut err = 0.0f64;
        for j in 0..dim {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * k[s][j];
                lo += B4[s] * k[s][j];
            }
            y_new[j] = y[j] + h * hi;
            let scale = opts.tol * (ABS_FLOOR + y[j].abs().max(y_new[j].abs()));
            err = err.max((h * (hi - lo)).abs() / scale);
        }
        if !err.is_finite() {
            summary.rejected_steps += 1;
            h *= 0.1;
            continue;
        }
        if err > 1.0 {
            summary.rejected_steps += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }

        t += h;
        std::mem::swap(&mut y, &mut y_new);
        // first-same-as-last: k[6] is the derivative at the new point
        k.swap(0, 6);
        summary.accepted_steps += 1;

        let min_component = y[..dim - 2].iter().copied().fold(f64::INFINITY, f64::min);
        if min_component < 0.0 {
            summary.max_constraint_violation = summary.max_constraint_violation.min(min_component);
            if min_component < NEGATIVITY_TOL {
                let index = y[..dim - 2].iter().position(|&v| v == min_component).unwrap_or(0);
                return Err(Error::NegativeState {
                    index,
                    value: min_component,
                    t,
                });
            }
        }
        let state = SystemState::from_vec(t, &y);
        let drift = (state.balance() - balance0 - alpha * (t - t0)).abs();
        summary.conservation_drift = summary.conservation_drift.max(drift);

        let norm = state_norm(&k[0]);
        summary.final_rhs_norm = norm;
        if opts.sample_every > 0 && summary.accepted_steps.is_multiple_of(opts.sample_every) {
            summary.samples.push(Sample {
                t,
                x: state.x,
                total_cells: state.total_cells(),
                total_load: state.total_load(),
                rhs_norm: norm,
            });
        }
        if norm <= CONVERGENCE_THRESHOLD {
            quiet_steps += 1;
            if quiet_steps >= CONVERGENCE_STEPS && !summary.converged {
                summary.converged = true;
                summary.converged_at = Some(t);
                if opts.stop_on_convergence {
                    summary.final_state = state;
                    return Ok(summary);
                }
            }
        } else {
            quiet_steps = 0;
            if !opts.stop_on_convergence {
                summary.converged = false;
                summary.converged_at = None;
            }
        }
        summary.final_state = state;
        h *= (0.9 * err.max(1e-10).powf(-0.2)).min(5.0);
    }
    Ok(summary)
}

fn initial_step(y: &[f64], dy: &[f64], tol: f64) -> f64 {
    let scale = |v: f64| tol * (1.0 + v.abs());
    let d0 = y.iter().fold(0.0f64, |acc, &v| acc.max(v.abs() / scale(v)));
    let d1 = y.iter().zip(dy).fold(0.0f64, |acc, (&v, &d)| acc.max(d.abs() / scale(v)));
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.clamp(1e-10, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piecewise::solve_roots;
    use crate::series::{cohort_profile, sum_iq_m, sum_k_m, SeriesOptions};
    use crate::PiecewiseConstantParams;

    fn pc(k: f64, n: usize) -> CoefficientFamily {
        CoefficientFamily::piecewise(k, n).unwrap()
    }

    #[test]
    fn empty_system_only_inhales() {
        let fam = pc(1.0, 1);
        let d = rhs(&fam, 0.7, 0.0, &SystemState::zero(5)).unwrap();
        assert_eq!(d.dx, 0.7);
        assert!(d.dm.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conservation_identity_is_algebraic() {
        let fam = pc(1.3, 2);
        let mut s = SystemState::zero(6);
        s.x = 0.8;
        s.m = vec![0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01];
        let (alpha, r) = (0.4, 1.1);
        let d = rhs(&fam, alpha, r, &s).unwrap();
        let lhs = d.dx + d.dm.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>();
        let i_max = 6;
        let clearance: f64 = (0..=i_max).map(|i| i as f64 * fam.p(i) * s.m[i]).sum();
        let boundary = (i_max + 1) as f64 * fam.k(i_max) * s.x * s.m[i_max];
        let expected = alpha - clearance - boundary;
        assert!((lhs - expected).abs() <= 8.0 * f64::EPSILON * 4.0);
        assert!((d.d_clearance - clearance).abs() <= 1e-15);
        assert!((d.d_flux - boundary).abs() <= 1e-15);
    }

    #[test]
    fn equilibrium_profile_is_stationary() {
        let fam = pc(1.0, 1);
        let params = PiecewiseConstantParams::new(1.0, 1).unwrap();
        let roots = solve_roots(&params, 0.2, 1.0, 1e-14).unwrap();
        let x = roots.roots[0].refined;
        let i_max = 60;
        let prof = cohort_profile(&fam, x, 1.0, i_max).unwrap();
        let s = SystemState {
            x,
            m: prof.m.clone(),
            ..SystemState::zero(i_max)
        };
        let d = rhs(&fam, 0.2, 1.0, &s).unwrap();
        let opts = SeriesOptions::default();
        let tails = x * sum_k_m(&fam, x, 1.0, opts).unwrap().tail_bound + sum_iq_m(&fam, x, 1.0, opts).unwrap().tail_bound;
        let truncation = x * prof.tail_mass_bound * (1.0 + i_max as f64);
        assert!(d.norm_inf() <= tails + truncation + 1e-12, "{}", d.norm_inf());
    }

    #[test]
    fn no_inhalation_keeps_cells_unloaded() {
        let fam = pc(1.0, 3);
        let out = integrate(&fam, 0.0, 1.0, &SystemState::zero(10), 40.0, IntegrateOptions::default()).unwrap();
        let s = &out.final_state;
        assert_eq!(s.x, 0.0);
        assert!(s.m[1..].iter().all(|&v| v == 0.0));
        assert!((s.m[0] - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn converges_to_lower_root() {
        let fam = pc(1.0, 1);
        let params = PiecewiseConstantParams::new(1.0, 1).unwrap();
        let roots = solve_roots(&params, 0.2, 1.0, 1e-14).unwrap();
        let out = integrate(&fam, 0.2, 1.0, &SystemState::zero(40), 2000.0, IntegrateOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.final_state.x - roots.roots[0].refined).abs() <= 1e-4);
        assert!(out.conservation_drift <= 1e-7);
        assert!(out.max_constraint_violation >= NEGATIVITY_TOL);
    }

    #[test]
    fn above_threshold_does_not_settle() {
        let fam = pc(1.0, 1);
        let out = integrate(&fam, 0.3, 1.0, &SystemState::zero(200), 200.0, IntegrateOptions::default()).unwrap();
        assert!(!out.converged);
        assert!(out.final_state.x > 5.0);
        assert!(out.final_rhs_norm > 1e-3);
    }
}
