mod config;
mod error;
mod logging;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::stages::Ctx;

#[derive(Debug, Parser)]
#[command(name = "qtkit", version, about = "Quantum-topological atom property pipeline")]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory holding every artifact of the run.
    #[arg(long, global = true, value_name = "DIR", default_value = "qtkit-out")]
    out_dir: PathBuf,

    /// Master seed; shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override one config key, e.g. `--set train.epochs=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Recompute outputs even when they exist, replacing ones made under another config.
    #[arg(long, global = true)]
    force: bool,

    /// Verbosity of the JSON log records on stderr.
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    log_level: LogLevel,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse geometries and per-atom targets into the canonical dataset.
    Ingest,
    /// Label atomic environments and choose the held-out labels.
    Cluster,
    /// Build the environment holdout and scaffold-grouped fold plan.
    Split,
    /// Train one QT-Net per variant and fold cell.
    Train,
    /// Score checkpoints on the holdout; run the molecular experiment if enabled.
    Eval,
    /// Repeated-measures model comparison over score matrices.
    Stats {
        /// Score CSVs to compare instead of the run's own.
        #[arg(long, value_name = "FILE")]
        scores: Vec<PathBuf>,
    },
    /// Annotate molecules with ensemble-predicted atomic properties.
    Infer,
    /// Reconstruct molecular dipoles from atomic contributions.
    Dipole,
    /// Verify artifact provenance and write the run report.
    Report,
    /// Run every stage in order.
    Run,
    /// Print the effective configuration as TOML.
    Config,
}

fn execute(cli: Cli) -> Result<()> {
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Command::Config = cli.command {
        let text = toml::to_string(&cfg).map_err(|e| CliError::usage(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    let ctx = Ctx::new(cfg, cli.out_dir, cli.force);
    log::info!("config_hash={}", ctx.prov.config_hash);
    match &cli.command {
        Command::Ingest => stages::ingest(&ctx),
        Command::Cluster => stages::cluster(&ctx),
        Command::Split => stages::split(&ctx),
        Command::Train => stages::train(&ctx),
        Command::Eval => stages::eval(&ctx),
        Command::Stats { scores } => stages::stats(&ctx, scores),
        Command::Infer => stages::infer(&ctx),
        Command::Dipole => stages::dipole(&ctx),
        Command::Report => stages::report(&ctx),
        Command::Run => {
            stages::ingest(&ctx)?;
            stages::cluster(&ctx)?;
            stages::split(&ctx)?;
            stages::train(&ctx)?;
            stages::infer(&ctx)?;
            stages::eval(&ctx)?;
            stages::stats(&ctx, &[])?;
            stages::dipole(&ctx)?;
            stages::report(&ctx)
        }
        Command::Config => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    logging::init(match cli.log_level {
        LogLevel::Error => log::LevelFilter::Error,
        LogLevel::Warn => log::LevelFilter::Warn,
        LogLevel::Info => log::LevelFilter::Info,
        LogLevel::Debug => log::LevelFilter::Debug,
    });
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let line = serde_json::json!({ "level": "error", "target": "qtkit", "msg": e.to_string(), "exit_code": code });
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}
