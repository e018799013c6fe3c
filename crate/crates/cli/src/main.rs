use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use treerpo::trainer::Mode;
use treerpo_cli::commands::{self, CompareArgs, EvalArgs, Overrides};

/// Tree-structured policy optimization on synthetic arithmetic tasks.
#[derive(Debug, Parser)]
#[command(name = "treerpo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one policy and write a run directory.
    Train {
        /// TOML config; defaults are used for missing keys.
        #[arg(long, conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Rerun from an existing run's manifest.json.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long)]
        eval_every: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Write into a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a checkpoint with pass@1 (mean over K samples).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Task file; defaults to the config's evaluation set.
        #[arg(long)]
        tasks: Option<PathBuf>,
        /// Evaluation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for per-task results.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
        /// Sample one tree on the first task and write its dump here.
        #[arg(long)]
        dump_tree: Option<PathBuf>,
    },
    /// Train two arms over several seeds and plot their curves.
    Compare {
        /// Base config for both arms; they differ only in mode.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Full config for the first arm (default: base in treerpo mode).
        #[arg(long)]
        config_a: Option<PathBuf>,
        /// Full config for the second arm (default: base in grpo mode).
        #[arg(long)]
        config_b: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long)]
        eval_every: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print a tree dump with group reward ranges and pruning decisions.
    Inspect {
        dump: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
    },
    /// Print the default config file.
    DefaultConfig,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: treerpo::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { config, manifest, out, seed, mode, eval_every, iterations, force } => {
            let overrides = Overrides { seed, mode, eval_every, iterations };
            commands::cmd_train(config.as_deref(), manifest.as_deref(), &overrides, &out, force)
        }
        Command::Eval { checkpoint, config, tasks, seed, out, force, dump_tree } => commands::cmd_eval(&EvalArgs {
            checkpoint: &checkpoint,
            config: config.as_deref(),
            tasks: tasks.as_deref(),
            seed,
            out: out.as_deref(),
            force,
            dump_tree: dump_tree.as_deref(),
        }),
        Command::Compare { config, config_a, config_b, seeds, eval_every, iterations, out, force } => {
            commands::cmd_compare(&CompareArgs {
                base: config.as_deref(),
                config_a: config_a.as_deref(),
                config_b: config_b.as_deref(),
                seeds: &seeds,
                eval_every,
                iterations,
                out: &out,
                force,
            })
        }
        Command::Inspect { dump, tau } => commands::cmd_inspect(&dump, tau),
        Command::DefaultConfig => {
            print!("{}", treerpo_cli::config::to_toml(&Default::default())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.chain().any(|c| {
                matches!(c.downcast_ref::<treerpo::Error>(), Some(treerpo::Error::Config { .. }))
                    || c.is::<toml::de::Error>()
            });
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
