use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use margin_audit::synth::PlantedSpec;
use margin_audit_cli::{execute, write_synthetic, CliError, Command, Result, RunConfig, SpaceSelection};

/// Outlier-based disparity audit for toxicity classifiers.
#[derive(Parser)]
#[command(name = "margin-audit", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the compute stages; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Outlier space to run: text, demographic, disagreement or all.
    #[arg(long, global = true, default_value = "all")]
    space: SpaceSelection,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load, validate and preprocess the dataset.
    Ingest,
    /// Embed comment texts.
    Embed,
    /// Attach model scores from files or a scoring endpoint.
    Score,
    /// Flag outliers in each configured space.
    Detect,
    /// Compute WMSE breakdowns, gaps, tests, MSE tables and composition.
    Audit,
    /// Sweep the contamination schedule.
    Sweep,
    /// Render report.md from the audit and sweep artifacts.
    Report,
    /// All of the above in order.
    Run,
    /// Write a synthetic dataset with a planted disparity.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 24)]
    groups: usize,
    #[arg(long, default_value = "bisexual")]
    planted_group: String,
    #[arg(long, default_value_t = 0.02)]
    prevalence: f64,
    #[arg(long, default_value_t = 3.0)]
    inflation: f64,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let command = match cli.command {
        Cmd::Synth(a) => {
            let planted = PlantedSpec {
                group: a.planted_group,
                prevalence: a.prevalence,
                inflation: a.inflation,
            };
            let out = cli.out.unwrap_or_else(|| PathBuf::from("synthetic"));
            return write_synthetic(a.n, a.groups, &planted, cli.seed.unwrap_or(0), &out);
        }
        Cmd::Ingest => Command::Ingest,
        Cmd::Embed => Command::Embed,
        Cmd::Score => Command::Score,
        Cmd::Detect => Command::Detect,
        Cmd::Audit => Command::Audit,
        Cmd::Sweep => Command::Sweep,
        Cmd::Report => Command::Report,
        Cmd::Run => Command::Run,
    };
    let path = cli
        .config
        .ok_or_else(|| CliError::Validation("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("audit-out"));
    execute(command, &cfg, cli.space, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
