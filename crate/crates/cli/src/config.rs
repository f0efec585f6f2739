//! Command-line flags, the TOML config file, and their merge into a validated [`RunConfig`].

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use fracheat::field_sim::DEFAULT_MAX_GRID_POINTS;
use fracheat::{BaseRule, KernelFamily, KernelSpec, QuadratureSpec, SpaceTimePoint};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    /// Existence threshold for a kernel and Hurst index.
    Existence,
    /// Kernel constants, point values and the I_f bracket.
    Kernel,
    /// Squared norm of the heat kernel in the noise's Hilbert space.
    Norm,
    /// Second moment E u(t1,x1) u(t2,x2) of the solution.
    Covariance,
    /// Exact Gaussian draws of the solution on a grid.
    Simulate,
    /// The acceptance suite.
    Verify,
}

impl CommandKind {
    fn from_name(s: &str) -> Result<Self, CliError> {
        <Self as ValueEnum>::from_str(s, true).map_err(|_| {
            CliError::Usage(format!(
                "unknown command '{s}' (expected one of existence, kernel, norm, covariance, simulate, verify)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Flags; any of them may instead come from the config file.
#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "fracheat",
    version,
    about = "Stochastic heat equation with fractional-in-time, colored-in-space Gaussian noise",
    after_help = "Exit codes: 0 success, 1 usage or I/O error, 2 numerical non-convergence, \
                  3 Hurst index below the existence threshold, 4 verification failure."
)]
pub struct Flags {
    /// Command to run (may also be given as `command` in the config file).
    #[arg(value_enum)]
    pub command: Option<CommandKind>,
    /// TOML config file; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Kernel family: white, riesz, bessel, heat, poisson.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub hurst: Option<f64>,
    /// Time horizon t.
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: Option<f64>,

    /// Point at which to evaluate the kernel (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// I_f arguments r and s (both required together).
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t1: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x1: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub t2: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x2: Option<Vec<f64>>,

    /// Number of equally spaced grid times in (0, horizon].
    #[arg(long)]
    pub grid_times: Option<usize>,
    /// Number of grid sites along the first axis.
    #[arg(long)]
    pub grid_sites: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub site_spacing: Option<f64>,
    #[arg(long)]
    pub max_points: Option<usize>,
    #[arg(long)]
    pub draws: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, allow_negative_numbers = true)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub panels: Option<usize>,
    #[arg(long)]
    pub max_refinements: Option<u32>,
    /// gauss-legendre or adaptive-simpson.
    #[arg(long)]
    pub base_rule: Option<String>,
    /// Disable splitting at integrand kinks.
    #[arg(long)]
    pub no_split: bool,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (written atomically); stdout if absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, env = "FRACHEAT_THREADS")]
    pub threads: Option<usize>,
    /// Subset of acceptance criteria to run (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u8>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    #[serde(default)]
    kernel: KernelSection,
    #[serde(default)]
    time: TimeSection,
    #[serde(default)]
    points: PointsSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    simulation: SimulationSection,
    #[serde(default)]
    quadrature: QuadratureSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    family: Option<String>,
    alpha: Option<f64>,
    dim: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    hurst: Option<f64>,
    horizon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsSection {
    x: Option<Vec<f64>>,
    r: Option<f64>,
    s: Option<f64>,
    t1: Option<f64>,
    x1: Option<Vec<f64>>,
    t2: Option<f64>,
    x2: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    times: Option<usize>,
    sites: Option<usize>,
    spacing: Option<f64>,
    max_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    draws: Option<u64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureSection {
    rel_tolerance: Option<f64>,
    panels_per_axis: Option<usize>,
    max_refinements: Option<u32>,
    base_rule: Option<String>,
    singularity_split: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    format: Option<Format>,
    path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    threads: Option<usize>,
    criteria: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub times: usize,
    pub sites: usize,
    pub spacing: f64,
    pub max_points: usize,
}

/// A validated run description; echoed verbatim into every output document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub kernel: Option<KernelSpec>,
    pub hurst: Option<f64>,
    pub horizon: f64,
    pub x: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub s: Option<f64>,
    pub point1: Option<SpaceTimePoint>,
    pub point2: Option<SpaceTimePoint>,
    pub grid: GridConfig,
    pub draws: u64,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub criteria: Vec<u8>,
}

/// Kernel and Hurst index used by `simulate` when none are given.
pub const SIMULATE_DEFAULT_ALPHA: f64 = 0.5;
pub const SIMULATE_DEFAULT_HURST: f64 = 0.75;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn lib(e: fracheat::Error) -> CliError {
    usage(e.to_string())
}

fn parse_base_rule(s: &str) -> Result<BaseRule, CliError> {
    match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "gauss-legendre" | "gauss" => Ok(BaseRule::GaussLegendre),
        "adaptive-simpson" | "simpson" => Ok(BaseRule::AdaptiveSimpson),
        other => Err(usage(format!(
            "unknown base rule '{other}' (expected gauss-legendre or adaptive-simpson)"
        ))),
    }
}

/// Rendered help or version text when those were requested.
pub fn help_or_version(args: &[String]) -> Option<String> {
    use clap::error::ErrorKind;
    let argv = std::iter::once("fracheat".to_string()).chain(args.iter().cloned());
    match Flags::try_parse_from(argv) {
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => Some(e.to_string()),
        _ => None,
    }
}

/// The `--config` path, if the flags parse at all.
pub fn config_path(args: &[String]) -> Option<PathBuf> {
    let argv = std::iter::once("fracheat".to_string()).chain(args.iter().cloned());
    Flags::try_parse_from(argv).ok().and_then(|f| f.config)
}

/// Parses flags (`args` excludes the program name) and optional config
/// text, flags taking precedence, and checks every precondition the chosen
/// command depends on.
pub fn parse_config(args: &[String], file: Option<&str>) -> Result<RunConfig, CliError> {
    let argv = std::iter::once("fracheat".to_string()).chain(args.iter().cloned());
    let flags = Flags::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
    let file: FileConfig = match file {
        Some(text) => toml::from_str(text).map_err(|e| usage(format!("config file: {e}")))?,
        None => FileConfig::default(),
    };
    merge(flags, file)
}

fn merge(f: Flags, c: FileConfig) -> Result<RunConfig, CliError> {
    let command = match (f.command, c.command.as_deref()) {
        (Some(cmd), _) => cmd,
        (None, Some(name)) => CommandKind::from_name(name)?,
        (None, None) => {
            return Err(usage(
                "missing command (expected one of existence, kernel, norm, covariance, simulate, verify)",
            ))
        }
    };

    let family = f.kernel.or(c.kernel.family);
    let alpha = f.alpha.or(c.kernel.alpha);
    let dim = f.dim.or(c.kernel.dim);
    let kernel = match family {
        Some(name) => {
            let family: KernelFamily = name.parse().map_err(lib)?;
            let dim = dim.ok_or_else(|| usage("--dim is required with --kernel"))?;
            let alpha = match (family, alpha) {
                (KernelFamily::WhiteNoise, a) => a.unwrap_or(0.0),
                (_, Some(a)) => a,
                (_, None) => return Err(usage(format!("--alpha is required for the {family} kernel"))),
            };
            Some(KernelSpec::new(family, alpha, dim).map_err(lib)?)
        }
        None if command == CommandKind::Simulate => Some(KernelSpec::new(
            KernelFamily::Riesz,
            alpha.unwrap_or(SIMULATE_DEFAULT_ALPHA),
            dim.unwrap_or(1),
        )
        .map_err(lib)?),
        None => None,
    };

    let hurst = f.hurst.or(c.time.hurst);
    let hurst = match (hurst, command) {
        (None, CommandKind::Simulate) => Some(SIMULATE_DEFAULT_HURST),
        (h, _) => h,
    };
    if let Some(h) = hurst {
        if !(h > 0.5 && h < 1.0) {
            return Err(usage(format!("hurst must lie in (1/2, 1), got {h}")));
        }
    }
    let horizon = f.horizon.or(c.time.horizon).unwrap_or(1.0);
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(usage(format!("horizon must be positive and finite, got {horizon}")));
    }

    let mut quadrature = QuadratureSpec::default();
    if let Some(v) = f.rel_tol.or(c.quadrature.rel_tolerance) {
        quadrature.rel_tolerance = v;
    }
    if let Some(v) = f.panels.or(c.quadrature.panels_per_axis) {
        quadrature.panels_per_axis = v;
    }
    if let Some(v) = f.max_refinements.or(c.quadrature.max_refinements) {
        quadrature.max_refinements = v;
    }
    if let Some(v) = f.base_rule.or(c.quadrature.base_rule) {
        quadrature.base_rule = parse_base_rule(&v)?;
    }
    if f.no_split {
        quadrature.singularity_split = false;
    } else if let Some(v) = c.quadrature.singularity_split {
        quadrature.singularity_split = v;
    }
    quadrature.validate().map_err(lib)?;

    let grid = GridConfig {
        times: f.grid_times.or(c.grid.times).unwrap_or(4),
        sites: f.grid_sites.or(c.grid.sites).unwrap_or(5),
        spacing: f.site_spacing.or(c.grid.spacing).unwrap_or(0.25),
        max_points: f.max_points.or(c.grid.max_points).unwrap_or(DEFAULT_MAX_GRID_POINTS),
    };
    let draws = f.draws.or(c.simulation.draws).unwrap_or(100);
    let seed = f.seed.or(c.simulation.seed).unwrap_or(0);
    let threads = f.threads.or(c.run.threads);
    if threads == Some(0) {
        return Err(usage("threads must be at least 1"));
    }
    let criteria = f.criteria.or(c.run.criteria).unwrap_or_else(|| (1..=9).collect());
    if let Some(bad) = criteria.iter().find(|k| !(1..=9).contains(*k)) {
        return Err(usage(format!("acceptance criteria are numbered 1 to 9, got {bad}")));
    }

    let x = f.x.or(c.points.x);
    let r = f.r.or(c.points.r);
    let s = f.s.or(c.points.s);
    let point = |t: Option<f64>, x: Option<Vec<f64>>, name: &str| -> Result<Option<SpaceTimePoint>, CliError> {
        match (t, x) {
            (Some(t), Some(x)) => SpaceTimePoint::new(t, x)
                .map(Some)
                .map_err(|e| usage(format!("point {name}: {e}"))),
            (None, None) => Ok(None),
            _ => Err(usage(format!("point {name} needs both --t{name} and --x{name}"))),
        }
    };
    let point1 = point(f.t1.or(c.points.t1), f.x1.or(c.points.x1), "1")?;
    let point2 = point(f.t2.or(c.points.t2), f.x2.or(c.points.x2), "2")?;

    let cfg = RunConfig {
        command,
        kernel,
        hurst,
        horizon,
        x,
        r,
        s,
        point1,
        point2,
        grid,
        draws,
        seed,
        quadrature,
        format: f.format.or(c.output.format).unwrap_or_default(),
        output: f.output.or(c.output.path),
        threads,
        criteria,
    };
    validate_for_command(&cfg)?;
    Ok(cfg)
}

fn validate_for_command(cfg: &RunConfig) -> Result<(), CliError> {
    use CommandKind::*;
    let need_kernel = matches!(cfg.command, Existence | Kernel | Norm | Covariance | Simulate);
    let need_hurst = matches!(cfg.command, Existence | Norm | Covariance | Simulate);
    let name = format!("{:?}", cfg.command).to_lowercase();
    if need_kernel && cfg.kernel.is_none() {
        return Err(usage(format!("{name} needs --kernel and --dim")));
    }
    if need_hurst && cfg.hurst.is_none() {
        return Err(usage(format!("{name} needs --hurst")));
    }
    let dim = cfg.kernel.map(|k| k.dim).unwrap_or(0);
    match cfg.command {
        Kernel => {
            if let Some(x) = &cfg.x {
                if x.len() != dim {
                    return Err(usage(format!("--x has {} coordinates, kernel dimension is {dim}", x.len())));
                }
            }
            match (cfg.r, cfg.s) {
                (Some(r), Some(s)) => {
                    if !(r >= 0.0 && s >= 0.0 && r < cfg.horizon && s < cfg.horizon) {
                        return Err(usage(format!("I_f needs 0 <= r, s < horizon, got r = {r}, s = {s}")));
                    }
                }
                (None, None) => {}
                _ => return Err(usage("--r and --s must be given together")),
            }
        }
        Covariance => {
            let (Some(p1), Some(p2)) = (&cfg.point1, &cfg.point2) else {
                return Err(usage("covariance needs --t1, --x1, --t2 and --x2"));
            };
            if p1.dim() != dim || p2.dim() != dim {
                return Err(usage(format!("covariance points must have dimension {dim}")));
            }
        }
        Simulate => {
            let g = &cfg.grid;
            if g.times == 0 || g.sites == 0 {
                return Err(usage("grid needs at least one time and one site"));
            }
            if !(g.spacing > 0.0 && g.spacing.is_finite()) {
                return Err(usage(format!("site spacing must be positive, got {}", g.spacing)));
            }
            let n = g.times.saturating_mul(g.sites);
            if n > g.max_points {
                return Err(usage(format!("grid has {n} points, above the cap of {}", g.max_points)));
            }
            if cfg.draws == 0 || cfg.draws >= 1 << 32 {
                return Err(usage("draws must lie in 1..2^32"));
            }
        }
        _ => {}
    }
    Ok(())
}
