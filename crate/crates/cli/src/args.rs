use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quartz_equilibria::grid::Spacing;

#[derive(Debug, Parser)]
#[command(name = "quartz", version, about = "Equilibria of the quartz-macrophage coagulation-death model")]
pub struct Cli {
    /// TOML file supplying defaults for any option not given on the command line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyKindArg {
    #[value(alias = "piecewise_constant")]
    Piecewise,
    #[value(name = "power_law", alias = "power-law")]
    PowerLaw,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpacingArg {
    Linear,
    Log,
}

impl From<SpacingArg> for Spacing {
    fn from(s: SpacingArg) -> Self {
        match s {
            SpacingArg::Linear => Spacing::Linear,
            SpacingArg::Log => Spacing::Log,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeriesArg {
    /// `K_{a,b}(x)` as `x -> oo`
    K,
    /// `R(a, A; v)` as `v -> 0`
    R,
}

/// Family selection.  Tabulated families come from the config file only.
#[derive(Debug, Clone, Default, Args)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: Option<FamilyKindArg>,
    /// Phagocytosis rate of the piecewise-constant family.
    #[arg(long)]
    pub k: Option<f64>,
    /// Clearance cutoff of the piecewise-constant family.
    #[arg(long = "N", id = "N")]
    pub n: Option<usize>,
    /// Power-law exponent `a = q + k`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Power-law exponent `b = k - p`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long)]
    pub p_exp: Option<f64>,
    #[arg(long)]
    pub q_exp: Option<f64>,
    #[arg(long)]
    pub k_exp: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long)]
    pub k0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SeriesArgs {
    /// Absolute tail tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub term_cap: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// F, the flux sums and optionally the cohort profile at x, or F on a grid.
    Equilibrium {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        /// Include cohorts M_0..M_n.
        #[arg(long)]
        profile: Option<usize>,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, value_enum)]
        spacing: Option<SpacingArg>,
    },
    /// Roots of alpha/r = F(x) for the piecewise-constant family.
    Roots {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Existence regime of a power-law family.
    Classify {
        #[command(flatten)]
        family: FamilyArgs,
        /// With --alpha, also decide existence (estimates m where needed).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Numerical threshold m = sup F of a power-law family.
    Threshold {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Asymptotic expansion, optionally compared with direct summation.
    Asym {
        #[arg(long, value_enum)]
        series: Option<SeriesArg>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        /// Exponent A of R(a, A; v).
        #[arg(long = "A", id = "A", allow_hyphen_values = true)]
        big_a: Option<f64>,
        #[arg(long)]
        depth: Option<usize>,
        /// Points (x for K, v for R) at which to compare with direct summation.
        #[arg(long, value_delimiter = ',')]
        compare_grid: Vec<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Telescoping identity audits at x.
    IdentityAudit {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        x: Option<f64>,
        /// Number of terms in the partial sums.
        #[arg(long)]
        n: Option<usize>,
        /// Largest acceptable residual.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Integrates the truncated system from an empty lung.
    Simulate {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        imax: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Record every this many accepted steps.
        #[arg(long)]
        sample_every: Option<usize>,
        /// Where to write the JSON summary in CSV mode (default: stderr).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Runs the acceptance suite and writes a pass/fail report.
    Reproduce {
        /// Subset of criteria, e.g. 1,3,9 (default: all).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
        #[arg(long)]
        seed: Option<u64>,
    },
}
