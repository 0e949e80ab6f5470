use clap::Args;
use rayon::prelude::*;
use regret_bw::bandwidth::{regret_curve, table_theta_grid, TABLE_LIPSCHITZ, TABLE_SAMPLE_SIZES};
use regret_bw::exact::{random_instances, verify_instance, VerificationRecord};
use regret_bw::{
    make_grid_design, normal_max_regret, normal_optimal_bandwidth, optimize_bandwidth, reference_table,
    BandwidthSolution, ComparisonRow, CurvePoint, ExperimentDesign, NormalModelSpec, ThetaGridSpec,
};
use serde::Serialize;

use crate::config::{CommonArgs, DesignSource, OutputFormat, RunConfig};
use crate::data::{load_dataset, OUTCOME_NOTICE};
use crate::error::{CliError, CliResult};
use crate::output::{to_csv, to_json};

/// Rendered output plus the process status to report after writing it.
pub struct Report {
    pub body: String,
    pub status: i32,
}

impl Report {
    fn ok(body: String) -> Self {
        Report { body, status: 0 }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Bandwidth grid as min:max:count (log spaced unless --theta-spacing)
    #[arg(long)]
    pub theta_grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest n1 + n0 of the random instances
    #[arg(long, default_value_t = 6)]
    pub max_n: usize,
    #[arg(long, default_value_t = 60)]
    pub instances: usize,
    /// Anchor grid points of the two-parameter search
    #[arg(long, default_value_t = 41)]
    pub anchor_resolution: usize,
    /// Grid points per site of the brute-force search
    #[arg(long, default_value_t = 21)]
    pub site_resolution: usize,
}

fn fmt(v: f64) -> String {
    v.to_string()
}

pub fn build_design(cfg: &RunConfig) -> CliResult<ExperimentDesign> {
    match &cfg.design {
        DesignSource::Grid { n1, n0 } => Ok(make_grid_design(*n1, *n0, cfg.lipschitz_c)?),
        DesignSource::File { path, target } => {
            let design = load_dataset(path, target.as_deref(), cfg.lipschitz_c)?;
            eprintln!("{OUTCOME_NOTICE}");
            Ok(design)
        }
        other => Err(CliError::Config(format!("design source {other:?} does not describe a single design"))),
    }
}

#[derive(Serialize)]
struct SolutionPayload<'a> {
    solution: &'a BandwidthSolution,
}

fn solution_csv(sol: &BandwidthSolution) -> String {
    let rows: Vec<Vec<String>> = sol
        .curve
        .iter()
        .map(|p| {
            let inside = p.theta >= sol.plateau.0 && p.theta <= sol.plateau.1;
            vec![fmt(p.theta), fmt(p.regret), fmt(p.se), inside.to_string(), (p.theta == sol.theta_star).to_string()]
        })
        .collect();
    to_csv(&["theta", "regret", "se", "in_plateau", "theta_star"], &rows)
}

pub fn optimize(mut cfg: RunConfig) -> CliResult<Report> {
    let design = build_design(&cfg)?;
    let grid = cfg.set_theta_grid(ThetaGridSpec::default_for(&design)?);
    let sol = optimize_bandwidth(&design, &cfg.kernel_spec(), &cfg.search_config(), &grid)?;
    Ok(Report::ok(match cfg.format {
        OutputFormat::Json => to_json("optimize", &cfg, SolutionPayload { solution: &sol })?,
        OutputFormat::Csv => solution_csv(&sol),
    }))
}

#[derive(Serialize)]
struct BreakdownRow {
    theta: f64,
    s_theta: f64,
    b_theta: f64,
    value: f64,
}

#[derive(Serialize)]
struct NormalPayload<'a> {
    solution: &'a BandwidthSolution,
    breakdown: Vec<BreakdownRow>,
}

pub fn normal(mut cfg: RunConfig) -> CliResult<Report> {
    let design = build_design(&cfg)?;
    let grid = cfg.set_theta_grid(ThetaGridSpec::default_for(&design)?);
    let spec = NormalModelSpec::new(design, cfg.kernel_spec(), cfg.sigma)?;
    let sol = normal_optimal_bandwidth(&spec, &grid)?;
    let breakdown = sol
        .curve
        .iter()
        .map(|p| {
            let b = normal_max_regret(&spec, p.theta)?;
            Ok(BreakdownRow { theta: b.theta, s_theta: b.s_theta, b_theta: b.b_theta, value: b.value })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Report::ok(match cfg.format {
        OutputFormat::Json => to_json("normal", &cfg, NormalPayload { solution: &sol, breakdown })?,
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = breakdown
                .iter()
                .map(|r| {
                    vec![
                        fmt(r.theta),
                        fmt(r.s_theta),
                        fmt(r.b_theta),
                        fmt(r.value),
                        (r.theta == sol.theta_star).to_string(),
                    ]
                })
                .collect();
            to_csv(&["theta", "s_theta", "b_theta", "value", "theta_star"], &rows)
        }
    }))
}

/// Parses `min:max:count`.
pub fn parse_theta_grid(s: &str) -> CliResult<(f64, f64, usize)> {
    let bad = || CliError::Config(format!("--theta-grid expects min:max:count, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].trim().parse().map_err(|_| bad())?,
        parts[1].trim().parse().map_err(|_| bad())?,
        parts[2].trim().parse().map_err(|_| bad())?,
    ))
}

#[derive(Serialize)]
struct CurvePayload<'a> {
    curve: &'a [CurvePoint],
}

pub fn curve(mut cfg: RunConfig, theta_grid: Option<&str>) -> CliResult<Report> {
    if let Some(spec) = theta_grid {
        let (lo, hi, count) = parse_theta_grid(spec)?;
        cfg.theta_overrides.theta_min = Some(lo);
        cfg.theta_overrides.theta_max = Some(hi);
        cfg.theta_overrides.count = Some(count);
    }
    let design = build_design(&cfg)?;
    let grid = cfg.set_theta_grid(ThetaGridSpec::default_for(&design)?);
    let points = regret_curve(&design, &cfg.kernel_spec(), &cfg.search_config(), &grid)?;
    Ok(Report::ok(match cfg.format {
        OutputFormat::Json => to_json("curve", &cfg, CurvePayload { curve: &points })?,
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = points.iter().map(|p| vec![fmt(p.theta), fmt(p.regret), fmt(p.se)]).collect();
            to_csv(&["theta", "regret", "se"], &rows)
        }
    }))
}

#[derive(Serialize)]
struct TablePayload<'a> {
    rows: &'a [ComparisonRow],
}

pub fn table1(mut cfg: RunConfig) -> CliResult<Report> {
    cfg.design = DesignSource::Table { lipschitz: TABLE_LIPSCHITZ.to_vec(), sample_sizes: TABLE_SAMPLE_SIZES.to_vec() };
    let grid = cfg.set_theta_grid(table_theta_grid());
    let rows = reference_table(
        &TABLE_LIPSCHITZ,
        &TABLE_SAMPLE_SIZES,
        &cfg.kernel_spec(),
        &cfg.search_config(),
        &grid,
        cfg.sigma,
    )?;
    Ok(Report::ok(match cfg.format {
        OutputFormat::Json => to_json("table1", &cfg, TablePayload { rows: &rows })?,
        OutputFormat::Csv => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt(r.lipschitz_c),
                        (r.n1 + r.n0).to_string(),
                        fmt(r.binary_theta_star),
                        fmt(r.binary_plateau.0),
                        fmt(r.binary_plateau.1),
                        fmt(r.binary_min_regret),
                        fmt(r.normal_theta_star),
                        fmt(r.normal_min_regret),
                        r.divergent.to_string(),
                    ]
                })
                .collect();
            to_csv(
                &[
                    "c",
                    "n",
                    "binary_theta_star",
                    "binary_plateau_lo",
                    "binary_plateau_hi",
                    "binary_min_regret",
                    "normal_theta_star",
                    "normal_min_regret",
                    "divergent",
                ],
                &body,
            )
        }
    }))
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    max_n: usize,
    instances: usize,
    anchor_resolution: usize,
    site_resolution: usize,
    violations: usize,
    max_abs_diff: f64,
    records: &'a [VerificationRecord],
}

#[derive(Serialize)]
struct VerifyPayload<'a> {
    verify: VerifySummary<'a>,
}

/// Exit status when the check ran but found disagreements.
pub const VERIFY_FAILED: i32 = 1;

pub fn verify(mut cfg: RunConfig, args: &VerifyArgs) -> CliResult<Report> {
    if args.anchor_resolution < 2 || args.site_resolution < 2 {
        return Err(CliError::Config("grid resolutions must be at least 2".into()));
    }
    cfg.design = DesignSource::Random { max_n: args.max_n, instances: args.instances };
    let kernel = cfg.kernel_spec();
    let instances = random_instances(cfg.seed, args.instances, args.max_n)?;
    let records = instances
        .par_iter()
        .map(|inst| verify_instance(inst, &kernel, args.anchor_resolution, args.site_resolution))
        .collect::<regret_bw::Result<Vec<_>>>()?;
    let violations = records.iter().filter(|r| !r.passed).count();
    let max_abs_diff = records.iter().map(|r| (r.reduced - r.brute_force).abs()).fold(0.0, f64::max);
    let body = match cfg.format {
        OutputFormat::Json => to_json(
            "verify",
            &cfg,
            VerifyPayload {
                verify: VerifySummary {
                    max_n: args.max_n,
                    instances: args.instances,
                    anchor_resolution: args.anchor_resolution,
                    site_resolution: args.site_resolution,
                    violations,
                    max_abs_diff,
                    records: &records,
                },
            },
        )?,
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    let xs = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
                    vec![
                        xs(&r.instance.x1),
                        xs(&r.instance.x0),
                        fmt(r.instance.lipschitz_c),
                        fmt(r.instance.theta),
                        fmt(r.reduced),
                        fmt(r.brute_force),
                        r.passed.to_string(),
                    ]
                })
                .collect();
            to_csv(&["x1", "x0", "c", "theta", "reduced", "brute_force", "passed"], &rows)
        }
    };
    Ok(Report { body, status: if violations == 0 { 0 } else { VERIFY_FAILED } })
}
