//! `fanova-shap`: Shapley values, functional ANOVA terms, interaction search
//! and Sobol indices from the command line.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical error, 4 external model
//! failure. Errors are also printed to stderr as a JSON object.

mod commands;
mod config;
mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fanova_shap::{Error, Result};
use serde_json::json;

use crate::config::{DesignArg, DistArg, Format, MethodArg, RunConfig};

const WORKERS_ENV: &str = "FANOVA_SHAP_WORKERS";

#[derive(Parser)]
#[command(name = "fanova-shap", version, about = "Shapley values through the functional ANOVA decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shapley values of one prediction
    Explain {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Design rows for regression-sampled
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// All functional ANOVA terms at a point
    Anova {
        #[command(flatten)]
        model: ModelArgs,
        /// Outer points for the per-term variance estimates (0 skips them)
        #[arg(long)]
        variance_points: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Breadth-first search for the ANOVA terms that carry the variance
    Search {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_order: Option<usize>,
        /// Write the per-order score tables here as CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// First-order and total Sobol indices with effective dimensions
    Sensitivity {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// The sixteen reference Shapley cells (four functions, four baselines)
    Table3 {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Alias matrix of second-order interactions against the main effects
    Alias {
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        /// Leading feature of the interaction columns (1-based)
        #[arg(long)]
        lead: Option<usize>,
        #[arg(long, value_enum)]
        design: Option<DesignArg>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Builtin model: linear3, linear-interaction3, nonlinear3, nonlinear-interaction3, additive-pair4
    #[arg(long)]
    model: Option<String>,
    /// Shell command reading CSV rows on stdin and printing one prediction per line
    #[arg(long)]
    external: Option<String>,
    /// Feature count of an external model
    #[arg(long)]
    p: Option<usize>,
    /// uniform01, normal, single:x1,..., local:SD, empirical:PATH, table3:A-D, a JSON object or @file.json
    #[arg(long)]
    dist: Option<String>,
    /// Point to explain, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    target: Option<Vec<f64>>,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample size
    #[arg(long)]
    n: Option<usize>,
    /// Write the result here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl ModelArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            model: self.model,
            external: self.external,
            p: self.p,
            dist: self.dist.map(DistArg::Short),
            target: self.target,
            ..Default::default()
        }
    }
}

impl CommonArgs {
    fn apply(self, flags: RunConfig) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig { seed: self.seed, n: self.n, output: self.output, format: self.format, ..flags };
        Ok(file.merged(flags))
    }
}

type Runner = fn(&RunConfig) -> Result<commands::Artifact>;

fn resolve(command: Command) -> Result<(RunConfig, Runner)> {
    Ok(match command {
        Command::Explain { model, method, budget, common } => {
            let flags = RunConfig { method, budget, ..model.into_config() };
            (common.apply(flags)?, commands::explain)
        }
        Command::Anova { model, variance_points, common } => {
            (common.apply(RunConfig { variance_points, ..model.into_config() })?, commands::anova)
        }
        Command::Search { model, epsilon, max_order, trace, common } => {
            (common.apply(RunConfig { epsilon, max_order, trace, ..model.into_config() })?, commands::search)
        }
        Command::Sensitivity { model, epsilon, common } => {
            (common.apply(RunConfig { epsilon, ..model.into_config() })?, commands::sensitivity)
        }
        Command::Table3 { common } => (common.apply(RunConfig::default())?, commands::table3),
        Command::Alias { p, budget, lead, design, common } => {
            (common.apply(RunConfig { p, budget, lead, design, ..Default::default() })?, commands::alias)
        }
    })
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn configure_workers() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|w| *w > 0)
        .ok_or_else(|| Error::Input(format!("{WORKERS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::Input(format!("cannot size the worker pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    configure_workers()?;
    let (cfg, runner) = resolve(cli.command)?;
    let artifact = runner(&cfg)?;
    let body = artifact.render(cfg.format.unwrap_or(artifact.default_format))?;
    match &cfg.output {
        Some(path) => write_atomic(path, &body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    if let (Some(path), Some(trace)) = (&cfg.trace, &artifact.trace) {
        write_atomic(path, trace)?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::Degenerate(_) => 3,
        Error::Evaluation(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let report = json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": code } });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
