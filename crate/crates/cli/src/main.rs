use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lesion_cli::config::RunConfig;
use lesion_cli::pipeline;

/// Functional-localization toolkit: trains small steering networks, ablates
/// neuron groups, and clusters the output changes across trials.
#[derive(Parser)]
#[command(name = "lesion", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed for the whole experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of independently trained trials.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Number of ablation groups in the target layer.
    #[arg(long, global = true)]
    groups: Option<usize>,

    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the trial networks and write them with the probe set.
    Train,
    /// Ablate each group of each trial and record output deltas.
    Ablate,
    /// Cluster the deltas and write the report bundle.
    Analyze,
    /// Render SVG figures from the report bundle.
    Report,
    /// Run train, ablate, analyze, and report in order.
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("{}", e.stderr_line());
                return ExitCode::from(e.kind.exit_code() as u8);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(groups) = cli.groups {
        cfg.groups = groups;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }

    let result = match cli.command {
        Command::Train => pipeline::cmd_train(&cfg),
        Command::Ablate => pipeline::cmd_ablate(&cfg),
        Command::Analyze => pipeline::cmd_analyze(&cfg),
        Command::Report => pipeline::cmd_report(&cfg),
        Command::All => pipeline::cmd_all(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.stderr_line());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
