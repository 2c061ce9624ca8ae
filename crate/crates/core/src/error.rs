use thiserror::Error;

/// Errors raised by the equilibrium, asymptotic and dynamics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infimum of d_i is {0}; series evaluation requires a strictly positive infimum")]
    NonPositiveInfimum(f64),

    #[error("tolerance {tol:e} not reached within {cap} terms (last tail bound {tail_bound:e})")]
    TermCap { tol: f64, cap: usize, tail_bound: f64 },

    #[error("internal consistency check failed: {what} (discrepancy {discrepancy:e}, allowed {allowed:e})")]
    Consistency {
        what: &'static str,
        discrepancy: f64,
        allowed: f64,
    },

    #[error("cutoff N = 0 is degenerate: F is identically zero and has no stationary point")]
    DegenerateCutoff,

    #[error("regime has no finite threshold: F is unbounded")]
    NoFiniteThreshold,

    #[error("F is still increasing at x_max = {x_max}; increase x_max")]
    NonConvergence { x_max: f64 },

    #[error("zeta argument hits the pole at s = 1 in expansion term k = {0}")]
    ZetaPole(usize),

    #[error("expansion depth {0} is not supported (maximum 2)")]
    DepthUnsupported(usize),

    #[error("b = -2: the leading term is of order log x and no coefficient is available")]
    LogOrder,

    #[error("step size underflow at t = {t} (h = {h:e}); the system is likely stiff")]
    StepUnderflow { t: f64, h: f64 },

    #[error("state component {index} became negative ({value:e}) at t = {t}")]
    NegativeState { index: usize, value: f64, t: f64 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
