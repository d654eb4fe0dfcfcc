//! Command-line front end. [`run`] parses arguments, merges the optional JSON
//! config, dispatches to a subcommand and maps failures to exit codes:
//! 2 for usage errors, 3 for data errors, 4 for numerical failures.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use iqlearn::simgen::{Estimator, Variant};

mod commands;
pub mod config;
mod output;

use config::{CdfChoice, JointChoice, RunConfig, VarianceChoice};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() }
        })
        .to_string()
    }
}

impl From<iqlearn::Error> for CliError {
    fn from(e: iqlearn::Error) -> Self {
        match e {
            iqlearn::Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "iqlearn",
    version,
    about = "Threshold- and quantile-optimal two-stage treatment regimes"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON config file; its values win over flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "IQLEARN_SEED")]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true, env = "IQLEARN_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct DataArg {
    /// Input CSV (generic or trial layout).
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstArgs {
    #[arg(long, value_enum)]
    cdf: Option<CdfChoice>,
    #[arg(long, value_enum)]
    joint: Option<JointChoice>,
    #[arg(long, value_enum)]
    variance_fit: Option<VarianceChoice>,
    /// Monte Carlo draws for the interim-covariate integrals.
    #[arg(long)]
    mc_draws: Option<usize>,
}

#[derive(Debug, Args)]
struct QiqArgs {
    #[arg(long)]
    delta: Option<f64>,
    /// Bisection tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    fixed_point_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Heteroskedasticity / skewness levels.
    #[arg(long = "C", value_delimiter = ',', allow_hyphen_values = true)]
    c: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the threshold-exceedance regime.
    FitTiq {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        est: EstArgs,
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
    },
    /// Fit the quantile-optimal regime.
    FitQiq {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        est: EstArgs,
        #[command(flatten)]
        qiq: QiqArgs,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Fit mean-optimal Q-learning.
    FitQ {
        #[command(flatten)]
        data: DataArg,
    },
    /// Fit mean-optimal interactive Q-learning.
    FitIq {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        est: EstArgs,
    },
    /// Fit Q-learning on the exceedance indicator.
    FitBinq {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
    },
    /// Run the simulation study and write tidy results.
    Simulate {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        est: EstArgs,
        #[command(flatten)]
        qiq: QiqArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        tau: Option<Vec<f64>>,
        /// Replications.
        #[arg(long = "J")]
        j: Option<usize>,
        /// Training size.
        #[arg(long = "n")]
        n: Option<usize>,
        /// Test size.
        #[arg(long = "N")]
        n_test: Option<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
        estimators: Option<Vec<Estimator>>,
        /// Only write one generated training set.
        #[arg(long)]
        data_only: bool,
    },
    /// Estimate a fitted regime's exceedance probability on data.
    Value {
        /// Model JSON written by a fit command.
        #[arg(long)]
        regime: Option<PathBuf>,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
    },
    /// Brute-force optimal values and per-history optimal actions.
    Oracle {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        tau: Option<Vec<f64>>,
        /// CSV of baseline histories (columns x1_1, x1_2).
        #[arg(long)]
        h1_grid: Option<PathBuf>,
        /// Simulation draws.
        #[arg(long)]
        nbig: Option<usize>,
    },
    /// Residual diagnostics for the second-stage model.
    Diagnose {
        #[command(flatten)]
        data: DataArg,
        /// Model JSON whose second stage to check; refit when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Simulations for the QQ band.
        #[arg(long)]
        qq_sims: Option<usize>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: iqlearn::Error| e.to_string())
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse().map_err(|e: iqlearn::Error| e.to_string())
}

impl EstArgs {
    fn apply(self, cfg: &mut RunConfig) {
        cfg.cdf = self.cdf;
        cfg.joint = self.joint;
        cfg.variance_fit = self.variance_fit;
        cfg.mc_draws = self.mc_draws;
    }
}

impl QiqArgs {
    fn apply(self, cfg: &mut RunConfig) {
        cfg.delta = self.delta;
        cfg.tolerance = self.tolerance;
        cfg.fixed_point_tolerance = self.fixed_point_tolerance;
    }
}

impl GenArgs {
    fn apply(self, cfg: &mut RunConfig) {
        cfg.variant = self.variant;
        cfg.c = self.c;
    }
}

/// Flag values as a config, plus the subcommand name.
fn flags_config(cli: Cli) -> (&'static str, RunConfig) {
    let mut cfg = RunConfig {
        out: cli.global.out,
        seed: cli.global.seed,
        threads: cli.global.threads,
        ..Default::default()
    };
    let name = match cli.command {
        Command::FitTiq { data, est, lambda } => {
            cfg.data = data.data;
            est.apply(&mut cfg);
            cfg.lambda = lambda.map(|l| vec![l]);
            "fit-tiq"
        }
        Command::FitQiq { data, est, qiq, tau } => {
            cfg.data = data.data;
            est.apply(&mut cfg);
            qiq.apply(&mut cfg);
            cfg.tau = tau.map(|t| vec![t]);
            "fit-qiq"
        }
        Command::FitQ { data } => {
            cfg.data = data.data;
            "fit-q"
        }
        Command::FitIq { data, est } => {
            cfg.data = data.data;
            est.apply(&mut cfg);
            "fit-iq"
        }
        Command::FitBinq { data, lambda } => {
            cfg.data = data.data;
            cfg.lambda = lambda.map(|l| vec![l]);
            "fit-binq"
        }
        Command::Simulate {
            gen,
            est,
            qiq,
            lambda,
            tau,
            j,
            n,
            n_test,
            estimators,
            data_only,
        } => {
            gen.apply(&mut cfg);
            est.apply(&mut cfg);
            qiq.apply(&mut cfg);
            cfg.lambda = lambda;
            cfg.tau = tau;
            cfg.j = j;
            cfg.n = n;
            cfg.n_test = n_test;
            cfg.estimators = estimators;
            cfg.data_only = data_only.then_some(true);
            "simulate"
        }
        Command::Value { regime, data, lambda } => {
            cfg.regime = regime;
            cfg.data = data.data;
            cfg.lambda = lambda;
            "value"
        }
        Command::Oracle {
            gen,
            lambda,
            tau,
            h1_grid,
            nbig,
        } => {
            gen.apply(&mut cfg);
            cfg.lambda = lambda;
            cfg.tau = tau;
            cfg.h1_grid = h1_grid;
            cfg.nbig = nbig;
            "oracle"
        }
        Command::Diagnose { data, model, qq_sims } => {
            cfg.data = data.data;
            cfg.model = model;
            cfg.qq_sims = qq_sims;
            "diagnose"
        }
    };
    (name, cfg)
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let config_path = cli.global.config.clone();
    let (name, flags) = flags_config(cli);
    let cfg = match config_path {
        Some(path) => {
            let file = config::load_file(&path)?;
            let (merged, warnings) = config::merge(&flags, &file);
            for w in warnings {
                eprintln!("warning: {w}");
            }
            merged
        }
        None => flags,
    };
    let threads = cfg.threads.unwrap_or(0);
    // Fails only if a pool already exists, as when `run` is called twice in
    // one process; the existing pool is then reused.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    commands::dispatch(name, &cfg)
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}
