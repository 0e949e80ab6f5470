//! Run configuration. Values come from command-line flags, then an optional
//! TOML file, then built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use regret_bw::{
    BinarySearchConfig, CrnScope, KernelFamily, KernelSpec, PGridSpec, PlateauRule, Spacing, ThetaGridSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_N1: usize = 5;
pub const DEFAULT_N0: usize = 5;
pub const DEFAULT_C: f64 = 0.1;
pub const DEFAULT_S: usize = 10_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_P_GRID: usize = 101;
pub const DEFAULT_SIGMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(CliError::Config(format!("unknown format {other:?} (expected json or csv)"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file supplying defaults for any option below (keys as flag names)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Treated units on the generated [-1, 1] grid design
    #[arg(long)]
    pub n1: Option<usize>,
    /// Control units on the generated grid design
    #[arg(long)]
    pub n0: Option<usize>,
    /// Lipschitz constant
    #[arg(long = "c")]
    pub c: Option<f64>,
    /// gaussian, uniform or epanechnikov
    #[arg(long)]
    pub kernel: Option<KernelFamily>,
    /// Monte Carlo draws
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points per axis of the target-probability grid
    #[arg(long)]
    pub p_grid: Option<usize>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub theta_count: Option<usize>,
    /// log or linear
    #[arg(long)]
    pub theta_spacing: Option<Spacing>,
    /// global (shared draws for every bandwidth) or per-theta
    #[arg(long)]
    pub crn_scope: Option<CrnScope>,
    /// Outcome standard deviation for the Gaussian benchmark
    #[arg(long)]
    pub sigma: Option<f64>,
    /// CSV with header y,d,x1[,x2,...]; replaces the grid design
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target covariate point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub target: Option<Vec<f64>>,
    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json or csv
    #[arg(long)]
    pub format: Option<OutputFormat>,
    /// Absolute plateau tolerance
    #[arg(long)]
    pub plateau_tol: Option<f64>,
    /// Standard errors added to the plateau tolerance
    #[arg(long)]
    pub plateau_z: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub n1: Option<usize>,
    pub n0: Option<usize>,
    pub c: Option<f64>,
    pub kernel: Option<KernelFamily>,
    pub s: Option<usize>,
    pub seed: Option<u64>,
    pub p_grid: Option<usize>,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub theta_count: Option<usize>,
    pub theta_spacing: Option<Spacing>,
    pub crn_scope: Option<CrnScope>,
    pub sigma: Option<f64>,
    pub data: Option<PathBuf>,
    pub target: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub plateau_tol: Option<f64>,
    pub plateau_z: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DesignSource {
    Grid {
        n1: usize,
        n0: usize,
    },
    File {
        path: PathBuf,
        target: Option<Vec<f64>>,
    },
    /// Grid designs `n1 = n0 = n / 2` for every listed `C` and `n`.
    Table {
        lipschitz: Vec<f64>,
        sample_sizes: Vec<usize>,
    },
    /// Random small designs of the reduction check.
    Random {
        max_n: usize,
        instances: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ThetaOverrides {
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub count: Option<usize>,
    pub spacing: Option<Spacing>,
}

impl ThetaOverrides {
    pub fn apply(&self, base: ThetaGridSpec) -> ThetaGridSpec {
        ThetaGridSpec {
            theta_min: self.theta_min.unwrap_or(base.theta_min),
            theta_max: self.theta_max.unwrap_or(base.theta_max),
            count: self.count.unwrap_or(base.count),
            spacing: self.spacing.unwrap_or(base.spacing),
        }
    }
}

/// Fully resolved configuration, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub design: DesignSource,
    pub lipschitz_c: f64,
    pub kernel: KernelFamily,
    pub s_draws: usize,
    pub seed: u64,
    pub p_grid: usize,
    pub theta_grid: Option<ThetaGridSpec>,
    pub crn_scope: CrnScope,
    pub sigma: f64,
    pub plateau: PlateauRule,
    pub format: OutputFormat,
    #[serde(skip)]
    pub theta_overrides: ThetaOverrides,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let crn_scope = args.crn_scope.or(file.crn_scope).unwrap_or_default();
        let base_rule = PlateauRule::default_for(crn_scope);
        let design = match args.data.clone().or(file.data) {
            Some(path) => DesignSource::File { path, target: args.target.clone().or(file.target) },
            None => DesignSource::Grid {
                n1: args.n1.or(file.n1).unwrap_or(DEFAULT_N1),
                n0: args.n0.or(file.n0).unwrap_or(DEFAULT_N0),
            },
        };
        let cfg = RunConfig {
            design,
            lipschitz_c: args.c.or(file.c).unwrap_or(DEFAULT_C),
            kernel: args.kernel.or(file.kernel).unwrap_or_default(),
            s_draws: args.s.or(file.s).unwrap_or(DEFAULT_S),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            p_grid: args.p_grid.or(file.p_grid).unwrap_or(DEFAULT_P_GRID),
            theta_grid: None,
            crn_scope,
            sigma: args.sigma.or(file.sigma).unwrap_or(DEFAULT_SIGMA),
            plateau: PlateauRule {
                abs_tol: args.plateau_tol.or(file.plateau_tol).unwrap_or(base_rule.abs_tol),
                z: args.plateau_z.or(file.plateau_z).unwrap_or(base_rule.z),
            },
            format: args.format.or(file.format).unwrap_or_default(),
            theta_overrides: ThetaOverrides {
                theta_min: args.theta_min.or(file.theta_min),
                theta_max: args.theta_max.or(file.theta_max),
                count: args.theta_count.or(file.theta_count),
                spacing: args.theta_spacing.or(file.theta_spacing),
            },
            out: args.out.clone().or(file.out),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.lipschitz_c.is_finite() && self.lipschitz_c >= 0.0) {
            return bad(format!("--c must be a nonnegative number, got {}", self.lipschitz_c));
        }
        if self.s_draws == 0 {
            return bad("--s must be positive".into());
        }
        if self.p_grid < 2 {
            return bad(format!("--p-grid must be at least 2, got {}", self.p_grid));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("--sigma must be positive, got {}", self.sigma));
        }
        if !(self.plateau.abs_tol >= 0.0 && self.plateau.z >= 0.0) {
            return bad("plateau tolerance and z must be nonnegative".into());
        }
        Ok(())
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec::new(self.kernel)
    }

    pub fn search_config(&self) -> BinarySearchConfig {
        BinarySearchConfig {
            seed: self.seed,
            s_draws: self.s_draws,
            crn_scope: self.crn_scope,
            p_grid: PGridSpec::new(self.p_grid),
            plateau: self.plateau,
        }
    }

    /// Fixes the bandwidth grid from a base spec and the user overrides, and
    /// records it for the echoed configuration.
    pub fn set_theta_grid(&mut self, base: ThetaGridSpec) -> ThetaGridSpec {
        let grid = self.theta_overrides.apply(base);
        self.theta_grid = Some(grid);
        grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults() {
        let cfg = RunConfig::resolve(&CommonArgs::default()).unwrap();
        assert_eq!(cfg.design, DesignSource::Grid { n1: 5, n0: 5 });
        assert_eq!(cfg.s_draws, DEFAULT_S);
        assert_eq!(cfg.kernel, KernelFamily::Gaussian);
        assert_eq!(cfg.plateau, PlateauRule::default_for(CrnScope::Global));
    }

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "s = 500\nseed = 9\nc = 0.3\ncrn-scope = \"per-theta\"").unwrap();
        let args = CommonArgs { config: Some(f.path().to_owned()), seed: Some(4), ..Default::default() };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!((cfg.s_draws, cfg.seed, cfg.lipschitz_c), (500, 4, 0.3));
        assert_eq!(cfg.crn_scope, CrnScope::PerTheta);
        assert_eq!(cfg.plateau.z, 1.0);
    }

    #[test]
    fn unknown_file_key() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "draws = 5").unwrap();
        let args = CommonArgs { config: Some(f.path().to_owned()), ..Default::default() };
        assert_eq!(RunConfig::resolve(&args).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn overrides_apply_per_field() {
        let o = ThetaOverrides { theta_max: Some(3.0), ..Default::default() };
        let g = o.apply(ThetaGridSpec::log(0.1, 1.0, 10));
        assert_eq!((g.theta_min, g.theta_max, g.count), (0.1, 3.0, 10));
    }

    #[test]
    fn rejects_bad_values() {
        for args in [
            CommonArgs { s: Some(0), ..Default::default() },
            CommonArgs { c: Some(-1.0), ..Default::default() },
            CommonArgs { sigma: Some(0.0), ..Default::default() },
            CommonArgs { p_grid: Some(1), ..Default::default() },
        ] {
            assert!(matches!(RunConfig::resolve(&args), Err(CliError::Config(_))));
        }
    }
}
