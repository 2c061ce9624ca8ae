use std::path::Path;

use serde::Deserialize;

use quartz_equilibria::grid::Spacing;
use quartz_equilibria::{FamilySpec, PiecewiseConstantParams, PowerLawParams};

use crate::args::{FamilyArgs, FamilyKindArg};
use crate::error::CliError;

/// Defaults read from `--config`; command-line flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDefaults {
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub x: Option<f64>,
    pub tol: Option<f64>,
    pub term_cap: Option<usize>,
    pub n: Option<usize>,
    pub threshold: Option<f64>,
    pub depth: Option<usize>,
    pub imax: Option<usize>,
    pub t_end: Option<f64>,
    pub sample_every: Option<usize>,
    pub seed: Option<u64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub count: Option<usize>,
    pub spacing: Option<Spacing>,
    pub grid: Option<usize>,
    pub profile: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "A")]
    pub big_a: Option<f64>,
    pub family: Option<FamilySpec>,
}

impl FileDefaults {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// First of the command-line value and the file value, else `default`.
pub fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

/// First of the command-line value and the file value, else a usage error.
pub fn require<T>(cli: Option<T>, file: Option<T>, flag: &str) -> Result<T, CliError> {
    cli.or(file).ok_or_else(|| CliError::Usage(format!("missing required value --{flag}")))
}

/// Resolves the family from flags, falling back to the config file.
pub fn resolve_family(args: &FamilyArgs, file: &FileDefaults) -> Result<FamilySpec, CliError> {
    let Some(kind) = args.family else {
        if let Some(spec) = &file.family {
            return Ok(spec.clone());
        }
        if args.a.is_some() || args.b.is_some() || file.a.is_some() {
            return power_law(args, file).map(FamilySpec::PowerLaw);
        }
        return Err(CliError::Usage(
            "no family given: pass --family or a [family] table in --config".into(),
        ));
    };
    match kind {
        FamilyKindArg::Piecewise => {
            let from_file = match &file.family {
                Some(FamilySpec::PiecewiseConstant(p)) => Some(*p),
                _ => None,
            };
            let k = require(args.k, from_file.map(|p| p.k), "k")?;
            let n = require(args.n, from_file.map(|p| p.n), "N")?;
            Ok(FamilySpec::PiecewiseConstant(PiecewiseConstantParams::new(k, n)?))
        }
        FamilyKindArg::PowerLaw => power_law(args, file).map(FamilySpec::PowerLaw),
        FamilyKindArg::Tabulated => match &file.family {
            Some(FamilySpec::Tabulated(t)) => {
                t.validate()?;
                Ok(FamilySpec::Tabulated(t.clone()))
            }
            _ => Err(CliError::Usage(
                "tabulated families are read from the [family] table of --config".into(),
            )),
        },
    }
}

fn power_law(args: &FamilyArgs, file: &FileDefaults) -> Result<PowerLawParams, CliError> {
    let from_file = match &file.family {
        Some(FamilySpec::PowerLaw(p)) => Some(*p),
        _ => None,
    };
    let exps = (args.p_exp, args.q_exp, args.k_exp);
    let base = match (args.a.or(file.a), args.b.or(file.b), exps) {
        (Some(a), Some(b), (None, None, None)) => PowerLawParams::from_ab(a, b)?,
        (None, None, (Some(p), Some(q), Some(k))) => PowerLawParams::new(p, q, k)?,
        (None, None, (None, None, None)) => from_file.ok_or_else(|| {
            CliError::Usage("power_law needs --a and --b, or --p-exp, --q-exp and --k-exp".into())
        })?,
        _ => {
            return Err(CliError::Usage(
                "give either both of --a, --b or all of --p-exp, --q-exp, --k-exp".into(),
            ))
        }
    };
    let fallback = from_file.unwrap_or(base);
    Ok(base.with_index_zero(
        args.p0.unwrap_or(fallback.p0),
        args.q0.unwrap_or(fallback.q0),
        args.k0.unwrap_or(fallback.k0),
    )?)
}
