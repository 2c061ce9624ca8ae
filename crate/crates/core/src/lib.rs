//! Equilibria of the infinite coagulation-death model for alveolar
//! macrophages exposed to a continuous influx of quartz.
//!
//! Macrophages carrying `i` particles form cohort `M_i`; cohorts grow by
//! phagocytosis (rate `k_i x`), are cleared with their load (rate `p_i`) or
//! die and release it (rate `q_i`).  The crate computes the steady states of
//! this system:
//!
//! * [`coefficients`]: rate families and their derived quantities,
//! * [`series`]: certified evaluation of the equilibrium series and the
//!   telescoping identity audits,
//! * [`piecewise`]: closed forms, threshold and exact root count for the
//!   piecewise-constant family,
//! * [`powerlaw`]: existence regimes and threshold estimation for power-law
//!   rates,
//! * [`asymptotics`]: special functions and large-`x` expansions of the
//!   power-law series,
//! * [`dynamics`]: time integration of the truncated system,
//! * [`acceptance`]: the reproducible verification suite.

pub mod acceptance;
pub mod asymptotics;
pub mod coefficients;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod piecewise;
pub mod powerlaw;
pub mod product_series;
pub mod series;
pub mod special;
pub mod summation;

pub use coefficients::{CoefficientFamily, FamilyKind, FamilySpec, PiecewiseConstantParams, PowerLawParams};
pub use error::{Error, Result};
pub use series::{EquilibriumProfile, SeriesOptions};
pub use summation::BoundedValue;
