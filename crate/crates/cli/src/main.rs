use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sentprobe_cli::{
    cmd_prepare, cmd_report, cmd_run_tasks, cmd_train_encoder, run_all, run_selfcheck, CliError, CliResult,
    ExperimentConfig, Options, Profile,
};

/// Probe sentence embeddings for length, word content and word order.
#[derive(Debug, Parser)]
#[command(name = "sentprobe", version)]
struct Cli {
    /// Experiment config file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scale defaults. `paper` is very expensive.
    #[arg(long, global = true, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    /// Worker threads; 1 gives fully deterministic scheduling.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize, filter and split the corpus and build the vocabulary.
    Prepare,
    /// Train sentence encoders.
    TrainEncoder {
        /// Train only this instance, e.g. `ed-32`.
        #[arg(long)]
        encoder: Option<String>,
    },
    /// Generate task data and train and evaluate probes.
    RunTasks,
    /// Write the report, significance tests and length analyses.
    Report,
    /// Run every stage in order.
    Run,
    /// Run gradient checks and oracle suites.
    Selfcheck,
}

fn load(cli: &Cli) -> CliResult<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config { line: None, msg: "--config is required for this command".into() })?;
    let mut cfg = ExperimentConfig::load(path, cli.profile, cli.seed)?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if cli.jobs == 0 {
        return Err(CliError::Config { line: None, msg: "--jobs must be at least 1".into() });
    }
    if cli.profile == Profile::Paper && !cli.quiet {
        eprintln!(
            "warning: the paper profile trains on a million sentences at up to 1000 dimensions; \
             expect days of compute"
        );
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let opts = Options { jobs: cli.jobs, quiet: cli.quiet };
    match &cli.command {
        Command::Selfcheck => {
            let results = run_selfcheck();
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(CliError::Check(failed));
            }
        }
        Command::Prepare => {
            let s = cmd_prepare(&load(cli)?, &opts)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::TrainEncoder { encoder } => {
            for info in cmd_train_encoder(&load(cli)?, &opts, encoder.as_deref())? {
                println!("{}", serde_json::to_string(&info)?);
            }
        }
        Command::RunTasks => {
            for c in cmd_run_tasks(&load(cli)?, &opts)? {
                println!("{}\t{:.4}\t{:.4}", c.cell, c.accuracy, c.baseline);
            }
        }
        Command::Report => {
            let s = cmd_report(&load(cli)?, &opts)?;
            println!("{}", s.csv.display());
        }
        Command::Run => {
            let s = run_all(&load(cli)?, &opts)?;
            println!("{}", s.csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
