use serde_json::json;
use thiserror::Error;

use quartz_equilibria::Error as CoreError;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Core(e) if is_numeric_failure(e) => EXIT_NUMERIC,
            Self::Core(_) => EXIT_USAGE,
            Self::Io(_) => EXIT_FAILURE,
        }
    }

    /// Structured diagnostic written to stderr.
    pub fn diagnostic(&self) -> serde_json::Value {
        let kind = match self {
            Self::Usage(_) => "usage",
            Self::Core(e) => core_kind(e),
            Self::Io(_) => "io",
        };
        let mut doc = json!({
            "error": {
                "kind": kind,
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        });
        if let Self::Core(e) = self {
            doc["error"]["details"] = core_details(e);
        }
        doc
    }
}

/// Failures of a well-posed computation, as opposed to invalid requests.
fn is_numeric_failure(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::TermCap { .. }
            | CoreError::Consistency { .. }
            | CoreError::NonConvergence { .. }
            | CoreError::StepUnderflow { .. }
            | CoreError::NegativeState { .. }
    )
}

fn core_kind(e: &CoreError) -> &'static str {
    match e {
        CoreError::InvalidParameter(_) => "invalid_parameter",
        CoreError::NonPositiveInfimum(_) => "non_positive_infimum",
        CoreError::TermCap { .. } => "term_cap",
        CoreError::Consistency { .. } => "consistency",
        CoreError::DegenerateCutoff => "degenerate_cutoff",
        CoreError::NoFiniteThreshold => "no_finite_threshold",
        CoreError::NonConvergence { .. } => "non_convergence",
        CoreError::ZetaPole(_) => "zeta_pole",
        CoreError::DepthUnsupported(_) => "depth_unsupported",
        CoreError::LogOrder => "log_order",
        CoreError::StepUnderflow { .. } => "step_underflow",
        CoreError::NegativeState { .. } => "negative_state",
        CoreError::Config(_) => "config",
    }
}

fn core_details(e: &CoreError) -> serde_json::Value {
    match e {
        CoreError::TermCap { tol, cap, tail_bound } => json!({ "tol": tol, "cap": cap, "tail_bound": tail_bound }),
        CoreError::Consistency {
            what,
            discrepancy,
            allowed,
        } => json!({ "what": what, "discrepancy": discrepancy, "allowed": allowed }),
        CoreError::NonConvergence { x_max } => json!({ "x_max": x_max }),
        CoreError::StepUnderflow { t, h } => json!({ "t": t, "h": h }),
        CoreError::NegativeState { index, value, t } => json!({ "index": index, "value": value, "t": t }),
        CoreError::NonPositiveInfimum(z) => json!({ "infimum": z }),
        CoreError::ZetaPole(k) => json!({ "term": k }),
        CoreError::DepthUnsupported(d) => json!({ "depth": d }),
        _ => json!({}),
    }
}
