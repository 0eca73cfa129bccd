//! `rpareto`: config-driven peaks-over-threshold pipelines.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or configuration
//! error.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Check, Ctx, SimulateArgs, ValidateArgs};
use config::{LoadedConfig, Method};
use error::CliError;
use io::{Output, Provenance};

#[derive(Parser)]
#[command(name = "rpareto", version, about = "Functional peaks-over-threshold analysis with generalized r-Pareto processes")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce the risk series to peaks separated in time.
    Decluster {
        /// Minimum separation in hours; overrides the config.
        #[arg(long)]
        separation: Option<f64>,
    },
    /// Fit the marginal model to the r-exceedances.
    FitMargins,
    /// Fit the dependence model given margins.
    FitDependence {
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Margins from an earlier `fit-margins` run; refitted when absent.
        #[arg(long)]
        margins: Option<PathBuf>,
    },
    /// Fit margins then dependence.
    Fit {
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Simulate from a fitted model or the configured process.
    Simulate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Put every sample at this risk level (linear functionals).
        #[arg(long)]
        fixed_risk: Option<f64>,
        /// Space-time storms whose spatial risk peaks at the configured centre time.
        #[arg(long)]
        conditional_peak: bool,
        /// Use the two-stage sampler for linear functionals.
        #[arg(long)]
        two_stage: bool,
    },
    /// Model checks.
    Validate {
        #[arg(value_enum)]
        check: Check,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Samples CSV from `simulate`; simulated afresh when absent.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        site: Option<usize>,
        #[arg(long)]
        u0: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        /// Per-site quantile level of the exceedances used as extremogram thresholds.
        #[arg(long)]
        quantile: Option<f64>,
    },
    /// Empirical extremogram for every site pair.
    Extremogram {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        quantile: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    let path = cli.config.ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let cfg = LoadedConfig::load(&path)?;
    let seed = cli.seed.or(cfg.config.seed);
    let dir = match (&cli.out, &cfg.config.output) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => cfg.resolve(d),
        (None, None) => PathBuf::from("."),
    };
    let out = Output::new(dir, Provenance::new(&cfg.sha256, seed))?;
    let ctx = Ctx { cfg, seed, out };
    match &cli.command {
        Command::Decluster { separation } => commands::cmd_decluster(&ctx, *separation),
        Command::FitMargins => commands::cmd_fit_margins(&ctx),
        Command::FitDependence { method, margins } => commands::cmd_fit_dependence(&ctx, *method, margins.as_deref()),
        Command::Fit { method } => commands::cmd_fit(&ctx, *method),
        Command::Simulate {
            model,
            n,
            fixed_risk,
            conditional_peak,
            two_stage,
        } => commands::cmd_simulate(
            &ctx,
            &SimulateArgs {
                model: model.as_deref(),
                n: *n,
                fixed_risk: *fixed_risk,
                conditional_peak: *conditional_peak,
                two_stage: *two_stage,
            },
        ),
        Command::Validate {
            check,
            model,
            samples,
            site,
            u0,
            n,
            quantile,
        } => commands::cmd_validate(
            &ctx,
            &ValidateArgs {
                check: *check,
                model: model.as_deref(),
                samples: samples.as_deref(),
                site: *site,
                u0: *u0,
                n: *n,
                quantile: *quantile,
            },
        ),
        Command::Extremogram { model, quantile } => commands::cmd_extremogram(&ctx, model.as_deref(), *quantile),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
