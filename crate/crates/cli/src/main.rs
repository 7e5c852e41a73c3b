use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rarefy::commands::{cmd_cross_validate, cmd_eps_limit, cmd_rates, cmd_run, cmd_verify, Context};
use rarefy::config::{CROSS_VALIDATE_TOML, DEFAULT_TOML, RATES_TOML};
use rarefy::{CliError, ExperimentConfig, ExperimentKind, OUT_DIR_ENV};
use rarefy_core::Mutation;

/// Simulator and verification harness for step-like data under
/// u_t = eps u_xx + (J*u - u) - u u_x.
#[derive(Debug, Parser)]
#[command(name = "rarefy", version)]
struct Cli {
    /// TOML config (or a JSON config / sidecar). Defaults to the shipped
    /// config for the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config entry, e.g. `--set grid.h=0.05`. Repeatable.
    #[arg(long = "set", global = true, value_name = "K=V")]
    set: Vec<String>,
    /// Output directory; beats RAREFY_OUT_DIR, which beats `out_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate and dump the requested snapshots.
    Run,
    /// Error norms per snapshot and fitted decay exponents.
    Rates {
        /// Refit the error columns of an existing norms.csv instead of running.
        #[arg(long, value_name = "CSV")]
        replay: Option<PathBuf>,
    },
    /// Run the check suite; exits nonzero if a non-informative check fails.
    Verify {
        /// Restrict to checks with this name or name prefix. Repeatable.
        #[arg(long, value_name = "NAME")]
        only: Vec<String>,
        /// Inject a deliberate defect: kernel, data or flux.
        #[arg(long = "break", value_name = "NAME")]
        mutation: Option<String>,
    },
    /// Distance between u^eps and u^0 for a decreasing eps list.
    EpsLimit,
    /// Convolution vs elliptic realization of L along a run.
    CrossValidate,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Run => ExperimentKind::Run,
            Command::Rates { .. } => ExperimentKind::Rates,
            Command::Verify { .. } => ExperimentKind::Verify,
            Command::EpsLimit => ExperimentKind::EpsLimit,
            Command::CrossValidate => ExperimentKind::CrossValidate,
        }
    }

    fn default_config(&self) -> &'static str {
        match self {
            Command::Rates { .. } => RATES_TOML,
            Command::CrossValidate => CROSS_VALIDATE_TOML,
            _ => DEFAULT_TOML,
        }
    }
}

fn output_dir(cli_out: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| Path::new("out").to_path_buf())
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p, &cli.set)?,
        None => ExperimentConfig::parse(cli.command.default_config(), false, &cli.set)?,
    };
    config.experiment = cli.command.kind();
    let out = output_dir(cli.out, &config);
    let ctx = Context::new(config, out)?;
    match &cli.command {
        Command::Run => cmd_run(&ctx),
        Command::Rates { replay } => cmd_rates(&ctx, replay.as_deref()),
        Command::Verify { only, mutation } => {
            let m = match mutation {
                Some(name) => Some(Mutation::from_name(name).ok_or_else(|| CliError::UnknownMutation(name.clone()))?),
                None => None,
            };
            cmd_verify(&ctx, only, m)
        }
        Command::EpsLimit => cmd_eps_limit(&ctx),
        Command::CrossValidate => cmd_cross_validate(&ctx),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
