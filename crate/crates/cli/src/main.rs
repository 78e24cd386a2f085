use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eocsa_cli::{run, CliError, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "eocsa", version, about = "Slide-to-survival pipeline runner")]
struct Args {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "eocsa.toml")]
    config: PathBuf,

    /// Seed used for every stage run by this invocation instead of the
    /// one derived from the global seed.
    #[arg(long, global = true)]
    stage_seed: Option<u64>,

    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic cohort
    Synth,
    /// Sample tissue patches from every slide
    Sample,
    /// Embed and cluster the patches
    Cluster,
    /// Train one network per cluster
    Train,
    /// Evaluate clusters and keep those above the threshold
    Select,
    /// Extract patch features from the selected clusters
    Features,
    /// Build weighted patient-level features
    Aggregate,
    /// Fit LASSO-Cox and compute survival statistics
    Survive,
    /// Render SVG plots
    Report,
    /// Run every stage in order
    All,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Synth => Stage::Synth,
            Command::Sample => Stage::Sample,
            Command::Cluster => Stage::Cluster,
            Command::Train => Stage::Train,
            Command::Select => Stage::Select,
            Command::Features => Stage::Features,
            Command::Aggregate => Stage::Aggregate,
            Command::Survive => Stage::Survive,
            Command::Report => Stage::Report,
            Command::All => return None,
        })
    }
}

fn main_inner(args: Args) -> Result<(), CliError> {
    if let Some(n) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    }
    let cfg = PipelineConfig::load(&args.config)?;
    for (stage, outcome) in run(cfg, args.command.stage(), args.stage_seed)? {
        println!("{stage}: {outcome:?}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
