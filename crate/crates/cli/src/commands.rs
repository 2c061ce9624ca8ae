use std::io::Write;
use std::path::PathBuf;

use serde_json::{json, Value};

use quartz_equilibria::acceptance::{run_criterion, CRITERIA, DEFAULT_SEED};
use quartz_equilibria::asymptotics::{k_direct, k_expansion_refined, r_expansion, r_sum_direct};
use quartz_equilibria::dynamics::{integrate, IntegrateOptions, SystemState, DEFAULT_I_MAX};
use quartz_equilibria::grid::{evaluate_grid, GridSpec, Spacing, GRID_CSV_HEADER};
use quartz_equilibria::piecewise::solve_roots;
use quartz_equilibria::powerlaw::{classify_regime, estimate_m, existence_verdict, MSearch, Regime};
use quartz_equilibria::product_series::{DEFAULT_TERM_CAP, DEFAULT_TOL};
use quartz_equilibria::series::{
    audit_d_identity, audit_g_identity, cohort_profile, f_equilibrium, h_series, sum_iq_m, sum_k_m,
};
use quartz_equilibria::{CoefficientFamily, FamilySpec, PowerLawParams, SeriesOptions};

use crate::args::{Cli, Command, FamilyArgs, Format, SeriesArg, SeriesArgs};
use crate::config::{pick, require, resolve_family, FileDefaults};
use crate::error::CliError;
use crate::output::{fmt_f64, to_value, write_json_file, write_json_to, Sink};

/// Default largest residual accepted by `identity-audit`.
const AUDIT_THRESHOLD: f64 = 1e-10;
const AUDIT_TERMS: usize = 200;
const DEFAULT_T_END: f64 = 1000.0;
const DEFAULT_DEPTH: usize = 2;
const DIRECT_TOL: f64 = 1e-13;

struct Ctx {
    file: FileDefaults,
    sink: Sink,
    output: Option<PathBuf>,
    format: Option<Format>,
}

impl Ctx {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn base_config(&self, verb: &str, format: Format) -> Value {
        json!({
            "command": verb,
            "output": self.output.as_ref().map_or("stdout".to_string(), |p| p.display().to_string()),
            "format": format.name(),
        })
    }

    fn json_only(&self, verb: &str) -> Result<Format, CliError> {
        match self.format_or(Format::Json) {
            Format::Json => Ok(Format::Json),
            Format::Csv => Err(CliError::Usage(format!("{verb} has no CSV output"))),
        }
    }

    fn series_options(&self, args: &SeriesArgs) -> SeriesOptions {
        SeriesOptions {
            tol: pick(args.tol, self.file.tol, DEFAULT_TOL),
            term_cap: pick(args.term_cap, self.file.term_cap, DEFAULT_TERM_CAP),
        }
    }
}

/// Runs one invocation; `Ok(false)` means a check ran and failed.
pub fn run(cli: Cli) -> Result<bool, CliError> {
    let ctx = Ctx {
        file: FileDefaults::load(cli.config.as_deref())?,
        sink: Sink::new(cli.output.clone()),
        output: cli.output,
        format: cli.format,
    };
    match cli.command {
        Command::Equilibrium {
            family,
            series,
            x,
            r,
            profile,
            x_min,
            x_max,
            count,
            spacing,
        } => {
            let grid = (x_min.or(ctx.file.x_min), x_max.or(ctx.file.x_max));
            if x.or(ctx.file.x).is_none() && (grid.0.is_some() || grid.1.is_some()) {
                let spec = GridSpec {
                    x_min: require(grid.0, None, "x-min")?,
                    x_max: require(grid.1, None, "x-max")?,
                    count: pick(count, ctx.file.count, 100),
                    spacing: spacing.map(Spacing::from).or(ctx.file.spacing).unwrap_or(Spacing::Log),
                };
                equilibrium_grid(&ctx, &family, &series, spec)
            } else {
                equilibrium_point(&ctx, &family, &series, x, r, profile)
            }
        }
        Command::Roots { family, alpha, r, tol } => roots(&ctx, &family, alpha, r, tol),
        Command::Classify {
            family,
            alpha,
            r,
            x_max,
            grid,
        } => classify(&ctx, &family, alpha, r, x_max, grid),
        Command::Threshold {
            family,
            x_min,
            x_max,
            grid,
            series,
        } => threshold(&ctx, &family, x_min, x_max, grid, &series),
        Command::Asym {
            series,
            a,
            b,
            big_a,
            depth,
            compare_grid,
            tol,
        } => asym(&ctx, series, a, b, big_a, depth, compare_grid, tol),
        Command::IdentityAudit {
            family,
            x,
            n,
            threshold,
        } => identity_audit(&ctx, &family, x, n, threshold),
        Command::Simulate {
            family,
            alpha,
            r,
            imax,
            t_end,
            tol,
            sample_every,
            summary,
        } => simulate(&ctx, &family, alpha, r, imax, t_end, tol, sample_every, summary),
        Command::Reproduce { criteria, seed } => reproduce(&ctx, criteria, seed),
    }
}

fn family_of(ctx: &Ctx, args: &FamilyArgs) -> Result<(FamilySpec, CoefficientFamily), CliError> {
    let spec = resolve_family(args, &ctx.file)?;
    let fam = CoefficientFamily::new(spec.clone())?;
    Ok((spec, fam))
}

fn power_law_of(ctx: &Ctx, args: &FamilyArgs) -> Result<PowerLawParams, CliError> {
    match resolve_family(args, &ctx.file)? {
        FamilySpec::PowerLaw(p) => Ok(p),
        other => Err(CliError::Usage(format!("this verb needs a power_law family, got {other:?}"))),
    }
}

fn equilibrium_point(
    ctx: &Ctx,
    args: &FamilyArgs,
    series: &SeriesArgs,
    x: Option<f64>,
    r: Option<f64>,
    profile: Option<usize>,
) -> Result<bool, CliError> {
    let (spec, fam) = family_of(ctx, args)?;
    let x = require(x, ctx.file.x, "x")?;
    let r = pick(r, ctx.file.r, 1.0);
    let opts = ctx.series_options(series);
    let profile = profile.or(ctx.file.profile);
    let format = ctx.format_or(Format::Json);
    let mut config = ctx.base_config("equilibrium", format);
    config["family"] = to_value(&spec)?;
    config["x"] = json!(x);
    config["r"] = json!(r);
    config["series"] = to_value(&opts)?;
    config["profile"] = json!(profile);

    let f = f_equilibrium(&fam, x, opts)?;
    match format {
        Format::Csv => {
            let row = vec![fmt_f64(x), fmt_f64(f.value), fmt_f64(f.tail_bound), f.terms_used.to_string()];
            ctx.sink.write_csv(&config, &GRID_CSV_HEADER, &[row])?;
        }
        Format::Json => {
            let mut result = json!({
                "x": x,
                "r": r,
                "F": f,
                "sum_k_M": sum_k_m(&fam, x, r, opts)?,
                "sum_iq_M": sum_iq_m(&fam, x, r, opts)?,
                "H": h_series(&fam, x, opts)?,
            });
            if let Some(n) = profile {
                result["profile"] = to_value(&cohort_profile(&fam, x, r, n)?)?;
            }
            ctx.sink.write_json(&config, result)?;
        }
    }
    Ok(true)
}

fn equilibrium_grid(ctx: &Ctx, args: &FamilyArgs, series: &SeriesArgs, grid: GridSpec) -> Result<bool, CliError> {
    let (spec, fam) = family_of(ctx, args)?;
    let opts = ctx.series_options(series);
    let format = ctx.format_or(Format::Csv);
    let mut config = ctx.base_config("equilibrium", format);
    config["family"] = to_value(&spec)?;
    config["grid"] = to_value(&grid)?;
    config["series"] = to_value(&opts)?;
    let rows = evaluate_grid(&grid, |x| f_equilibrium(&fam, x, opts))?;
    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![fmt_f64(r.x), fmt_f64(r.value), fmt_f64(r.tail_bound), r.terms_used.to_string()])
                .collect();
            ctx.sink.write_csv(&config, &GRID_CSV_HEADER, &rows)?;
        }
        Format::Json => ctx.sink.write_json(&config, to_value(&rows)?)?,
    }
    Ok(true)
}

fn roots(ctx: &Ctx, args: &FamilyArgs, alpha: Option<f64>, r: Option<f64>, tol: Option<f64>) -> Result<bool, CliError> {
    let format = ctx.json_only("roots")?;
    let params = match resolve_family(args, &ctx.file)? {
        FamilySpec::PiecewiseConstant(p) => p,
        _ => {
            return Err(CliError::Usage(
                "roots is exact only for the piecewise family; use classify for power laws".into(),
            ))
        }
    };
    let alpha = require(alpha, ctx.file.alpha, "alpha")?;
    let r = pick(r, ctx.file.r, 1.0);
    let tol = pick(tol, ctx.file.tol, DEFAULT_TOL);
    let mut config = ctx.base_config("roots", format);
    config["family"] = to_value(&FamilySpec::PiecewiseConstant(params))?;
    config["alpha"] = json!(alpha);
    config["r"] = json!(r);
    config["tol"] = json!(tol);
    let report = solve_roots(&params, alpha, r, tol)?;
    ctx.sink.write_json(&config, to_value(&report)?)?;
    Ok(true)
}

fn m_search(ctx: &Ctx, x_min: Option<f64>, x_max: Option<f64>, grid: Option<usize>, series: SeriesOptions) -> MSearch {
    let d = MSearch::default();
    MSearch {
        x_min: pick(x_min, ctx.file.x_min, d.x_min),
        x_max: pick(x_max, ctx.file.x_max, d.x_max),
        grid: pick(grid, ctx.file.grid, d.grid),
        series,
    }
}

fn classify(
    ctx: &Ctx,
    args: &FamilyArgs,
    alpha: Option<f64>,
    r: Option<f64>,
    x_max: Option<f64>,
    grid: Option<usize>,
) -> Result<bool, CliError> {
    let format = ctx.json_only("classify")?;
    let params = power_law_of(ctx, args)?;
    let alpha = alpha.or(ctx.file.alpha);
    let mut config = ctx.base_config("classify", format);
    config["family"] = to_value(&FamilySpec::PowerLaw(params))?;
    let result = match alpha {
        Some(alpha) => {
            let r = pick(r, ctx.file.r, 1.0);
            let search = m_search(ctx, None, x_max, grid, SeriesOptions::default());
            config["alpha"] = json!(alpha);
            config["r"] = json!(r);
            config["search"] = to_value(&search)?;
            let (verdict, existence) = existence_verdict(&params, alpha, r, search)?;
            json!({ "verdict": verdict, "existence": existence })
        }
        None => json!({ "verdict": classify_regime(&params)? }),
    };
    let mut result = result;
    result["growth_exponent"] = json!((params.b() + 2.0) / (params.a() + 1.0));
    ctx.sink.write_json(&config, result)?;
    Ok(true)
}

fn threshold(
    ctx: &Ctx,
    args: &FamilyArgs,
    x_min: Option<f64>,
    x_max: Option<f64>,
    grid: Option<usize>,
    series: &SeriesArgs,
) -> Result<bool, CliError> {
    let format = ctx.json_only("threshold")?;
    let params = power_law_of(ctx, args)?;
    let search = m_search(ctx, x_min, x_max, grid, ctx.series_options(series));
    let mut config = ctx.base_config("threshold", format);
    config["family"] = to_value(&FamilySpec::PowerLaw(params))?;
    config["search"] = to_value(&search)?;
    let mut verdict = classify_regime(&params)?;
    if verdict.regime != Regime::AlwaysExists {
        verdict.m_estimate = Some(estimate_m(&params, search)?);
    }
    ctx.sink.write_json(&config, to_value(&verdict)?)?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn asym(
    ctx: &Ctx,
    series: Option<SeriesArg>,
    a: Option<f64>,
    b: Option<f64>,
    big_a: Option<f64>,
    depth: Option<usize>,
    compare_grid: Vec<f64>,
    tol: Option<f64>,
) -> Result<bool, CliError> {
    let series = series.unwrap_or(SeriesArg::K);
    let a = require(a, ctx.file.a, "a")?;
    let depth = pick(depth, ctx.file.depth, DEFAULT_DEPTH);
    let tol = pick(tol, ctx.file.tol, DIRECT_TOL);
    let format = ctx.format_or(if compare_grid.is_empty() { Format::Json } else { Format::Csv });
    let mut config = ctx.base_config("asym", format);
    config["a"] = json!(a);
    config["depth"] = json!(depth);
    config["tol"] = json!(tol);
    config["compare_grid"] = json!(compare_grid);

    let (variable, expansion, direct): (&str, _, Box<dyn Fn(f64) -> quartz_equilibria::Result<f64>>) = match series {
        SeriesArg::K => {
            let b = require(b, ctx.file.b, "b")?;
            config["series"] = json!("K");
            config["b"] = json!(b);
            let e = k_expansion_refined(a, b, depth)?;
            (
                "x",
                e,
                Box::new(move |x| Ok(k_direct(a, b, x, tol, DEFAULT_TERM_CAP)?.value)),
            )
        }
        SeriesArg::R => {
            let big_a = require(big_a, ctx.file.big_a, "A")?;
            config["series"] = json!("R");
            config["A"] = json!(big_a);
            let e = r_expansion(a, big_a, depth)?;
            (
                "v",
                e,
                Box::new(move |v| Ok(r_sum_direct(a, big_a, v, tol, DEFAULT_TERM_CAP)?.value)),
            )
        }
    };
    let rows = compare_grid
        .iter()
        .map(|&t| {
            let d = direct(t)?;
            let e = expansion.eval(t);
            Ok([t, d, e, d - e])
        })
        .collect::<Result<Vec<[f64; 4]>, CliError>>()?;
    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect()).collect();
            ctx.sink
                .write_csv(&config, &[variable, "direct", "expansion", "residual"], &rows)?;
        }
        Format::Json => {
            let comparison: Vec<Value> = rows
                .iter()
                .map(|r| json!({ variable: r[0], "direct": r[1], "expansion": r[2], "residual": r[3] }))
                .collect();
            let mut result = to_value(&expansion)?;
            result["comparison"] = json!(comparison);
            ctx.sink.write_json(&config, result)?;
        }
    }
    Ok(true)
}

fn identity_audit(
    ctx: &Ctx,
    args: &FamilyArgs,
    x: Option<f64>,
    n: Option<usize>,
    threshold: Option<f64>,
) -> Result<bool, CliError> {
    let format = ctx.json_only("identity-audit")?;
    let (spec, fam) = family_of(ctx, args)?;
    let x = require(x, ctx.file.x, "x")?;
    let n = pick(n, ctx.file.n, AUDIT_TERMS);
    let threshold = pick(threshold, ctx.file.threshold, AUDIT_THRESHOLD);
    let mut config = ctx.base_config("identity-audit", format);
    config["family"] = to_value(&spec)?;
    config["x"] = json!(x);
    config["n"] = json!(n);
    config["threshold"] = json!(threshold);
    let g = audit_g_identity(&fam, x, n)?;
    let d = audit_d_identity(&fam, x, n)?;
    let passed = g.closed_form_residual <= threshold && d.residual <= threshold;
    ctx.sink
        .write_json(&config, json!({ "g_identity": g, "d_identity": d, "passed": passed }))?;
    Ok(passed)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    ctx: &Ctx,
    args: &FamilyArgs,
    alpha: Option<f64>,
    r: Option<f64>,
    imax: Option<usize>,
    t_end: Option<f64>,
    tol: Option<f64>,
    sample_every: Option<usize>,
    summary_path: Option<PathBuf>,
) -> Result<bool, CliError> {
    let (spec, fam) = family_of(ctx, args)?;
    let alpha = require(alpha, ctx.file.alpha, "alpha")?;
    let r = pick(r, ctx.file.r, 1.0);
    let imax = pick(imax, ctx.file.imax, DEFAULT_I_MAX);
    let t_end = pick(t_end, ctx.file.t_end, DEFAULT_T_END);
    let opts = IntegrateOptions {
        tol: pick(tol, ctx.file.tol, IntegrateOptions::default().tol),
        sample_every: pick(sample_every, ctx.file.sample_every, 1),
        ..IntegrateOptions::default()
    };
    let format = ctx.format_or(Format::Csv);
    let mut config = ctx.base_config("simulate", format);
    config["family"] = to_value(&spec)?;
    config["alpha"] = json!(alpha);
    config["r"] = json!(r);
    config["imax"] = json!(imax);
    config["t_end"] = json!(t_end);
    config["tol"] = json!(opts.tol);
    config["sample_every"] = json!(opts.sample_every);

    let mut summary = integrate(&fam, alpha, r, &SystemState::zero(imax), t_end, opts)?;
    match format {
        Format::Json => ctx.sink.write_json(&config, to_value(&summary)?)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = summary
                .samples
                .iter()
                .map(|s| [s.t, s.x, s.total_cells, s.total_load, s.rhs_norm].map(fmt_f64).to_vec())
                .collect();
            ctx.sink
                .write_csv(&config, &["t", "x", "total_cells", "total_load", "rhs_norm"], &rows)?;
            summary.samples.clear();
            let doc = json!({ "config": config, "result": summary });
            match summary_path {
                Some(p) => write_json_file(&p, &doc)?,
                None => write_json_to(Box::new(std::io::stderr().lock()), &doc)?,
            }
        }
    }
    Ok(true)
}

fn reproduce(ctx: &Ctx, criteria: Vec<u8>, seed: Option<u64>) -> Result<bool, CliError> {
    let seed = pick(seed, ctx.file.seed, DEFAULT_SEED);
    let ids: Vec<u8> = if criteria.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        criteria
    };
    let format = ctx.format_or(Format::Json);
    let mut config = ctx.base_config("reproduce", format);
    config["seed"] = json!(seed);
    config["criteria"] = json!(ids);

    let mut outcomes = Vec::with_capacity(ids.len());
    let mut stderr = std::io::stderr().lock();
    for &id in &ids {
        let outcome = run_criterion(id, seed).map_err(|e| CliError::Usage(e.to_string()))?;
        let _ = writeln!(stderr, "{outcome}");
        outcomes.push(outcome);
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    match format {
        Format::Json => {
            let passed = outcomes.iter().filter(|o| o.passed).count();
            let result = json!({
                "all_passed": all_passed,
                "passed": passed,
                "failed": outcomes.len() - passed,
                "outcomes": outcomes,
            });
            ctx.sink.write_json(&config, result)?;
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = outcomes
                .iter()
                .map(|o| {
                    vec![
                        o.id.to_string(),
                        o.title.to_string(),
                        if o.passed { "PASS" } else { "FAIL" }.to_string(),
                        fmt_f64(o.seconds),
                        fmt_f64(o.budget_seconds),
                        o.detail.clone(),
                    ]
                })
                .collect();
            ctx.sink.write_csv(
                &config,
                &["id", "title", "status", "seconds", "budget_seconds", "detail"],
                &rows,
            )?;
        }
    }
    Ok(all_passed)
}
