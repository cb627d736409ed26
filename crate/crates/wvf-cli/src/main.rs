use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wvf_cli::config::ExperimentConfig;
use wvf_cli::{run, CliError};
use wvf_core::dynamics::CandidateScope;

/// Tabular world value functions: learn, solve, transfer and compose.
#[derive(Parser)]
#[command(name = "wvf", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured learning pipeline (learn, then the configured
    /// eval/render/infer stages) for every seed.
    Learn {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the exact WVF and task tables for the configured task.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the greedy task policy of a saved WVF table.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infer the transition model from a saved WVF table.
    #[command(name = "infer-dynamics")]
    InferDynamics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: PathBuf,
        /// Candidate scope: `full` or a neighbourhood radius.
        #[arg(long)]
        scope: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infer the configured task's values and policy from a pretrained WVF.
    #[command(name = "zero-shot")]
    ZeroShot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compose Boolean expressions over oracle-solved base tasks.
    Compose {
        #[arg(long)]
        config: PathBuf,
        /// Single expression overriding the config's list.
        #[arg(long)]
        expr: Option<String>,
        /// Sweep all 2^(2^2) Boolean functions of the first two base tasks.
        #[arg(long)]
        enumerate: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render heatmaps of a saved WVF table.
    Render {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(
    config: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(ExperimentConfig, String), CliError> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", config.display())))?;
    let dir = config.parent().unwrap_or(std::path::Path::new("."));
    let mut cfg = ExperimentConfig::parse(&text, dir)?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    Ok((cfg, text))
}

fn dispatch(cli: Cli) -> Result<PathBuf, CliError> {
    match cli.cmd {
        Cmd::Learn { config, seed, out } => {
            let (cfg, text) = load(&config, seed, out)?;
            run::cmd_learn(&cfg, &text)
        }
        Cmd::Oracle { config, out } => {
            let (cfg, text) = load(&config, None, out)?;
            run::cmd_oracle(&cfg, &text)
        }
        Cmd::Eval {
            config,
            table,
            seed,
            out,
        } => {
            let (cfg, text) = load(&config, seed, out)?;
            run::cmd_eval(&cfg, &text, &table)
        }
        Cmd::InferDynamics {
            config,
            table,
            scope,
            out,
        } => {
            let (mut cfg, text) = load(&config, None, out)?;
            if let Some(scope) = scope {
                cfg.infer_scope = match scope.as_str() {
                    "full" => CandidateScope::Full,
                    r => CandidateScope::Neighbourhood(r.parse().map_err(|e| {
                        CliError::Config(format!("--scope: expected 'full' or a radius: {e}"))
                    })?),
                };
            }
            run::cmd_infer(&cfg, &text, &table)
        }
        Cmd::ZeroShot { config, table, out } => {
            let (cfg, text) = load(&config, None, out)?;
            run::cmd_zero_shot(&cfg, &text, &table)
        }
        Cmd::Compose {
            config,
            expr,
            enumerate,
            out,
        } => {
            let (cfg, text) = load(&config, None, out)?;
            run::cmd_compose(&cfg, &text, expr.as_deref(), enumerate)
        }
        Cmd::Render { config, table, out } => {
            let (cfg, text) = load(&config, None, out)?;
            run::cmd_render(&cfg, &text, &table)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(dir) => {
            println!("artifacts written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
