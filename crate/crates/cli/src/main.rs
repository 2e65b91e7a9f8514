use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use seglab_cli::{CliError, Kind, RunOptions, RunOutcome, ToleranceProfile};

#[derive(Parser)]
#[command(name = "seglab", version, about = "Segregated configurations: solve, partition and diagnose")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "SEGLAB_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = ToleranceProfile::Default)]
    tolerance_profile: ToleranceProfile,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Diagnose saved fields, from a `diagnose` config or from field files.
    Diagnose {
        #[arg(long, conflicts_with = "field", required_unless_present = "field")]
        config: Option<PathBuf>,
        /// One field file per component.
        #[arg(long)]
        field: Vec<PathBuf>,
        /// `auto` or a JSON file with a list of `[x, y]` centers.
        #[arg(long)]
        centers: Option<String>,
    },
    /// Invariant suite on the homogeneous prototypes.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<RunOutcome, CliError> {
    let opts = RunOptions {
        out: cli.common.out,
        seed: cli.common.seed,
        profile: cli.common.tolerance_profile,
    };
    match cli.command {
        Command::Run { config } => seglab_cli::run_file(&config, &opts),
        Command::Diagnose { config: Some(c), .. } => expect_kind(&c, Kind::Diagnose, &opts),
        Command::Diagnose { field, centers, .. } => seglab_cli::diagnose_files(&field, centers.as_deref(), &opts),
        Command::Validate { config: Some(c) } => expect_kind(&c, Kind::Validate, &opts),
        Command::Validate { config: None } => seglab_cli::validate_default(&opts),
    }
}

fn expect_kind(path: &std::path::Path, kind: Kind, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let (cfg, _) = seglab_cli::ExperimentConfig::load(path)?;
    if cfg.kind != kind {
        return Err(CliError::invalid(format!("expected a `{kind}` config, got `{}`", cfg.kind)));
    }
    seglab_cli::run_file(path, opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")
        {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(outcome) => {
            for s in &outcome.report.stages {
                let flag = if s.pass { "pass" } else { "FAIL" };
                println!("{flag} {} ({:.2} s)", s.name, s.seconds);
            }
            if let Some(e) = &outcome.failure {
                eprintln!("error: {e}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
