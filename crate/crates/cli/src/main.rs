use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, warn};
use mlt_tool::{parse_config, run, RunConfig, RunKind};

/// Noise-induced transitions of the Morris-Lecar neuron.
#[derive(Parser)]
#[command(name = "mlt-tool", version)]
struct Cli {
    /// What to compute
    kind: RunKind,
    /// TOML run configuration; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured global seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (also read from MLT_JOBS)
    #[arg(long, env = "MLT_JOBS")]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match parse_config(path) {
            Ok(c) => c,
            Err(e) => {
                error!("{e}");
                return ExitCode::FAILURE;
            }
        },
        None => RunConfig::default(),
    };
    if let Some(kind) = cfg.kind {
        if kind != cli.kind {
            warn!("config names run kind {kind}, running {} as requested", cli.kind);
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli.kind, &cfg) {
        Ok(manifest) => {
            for w in &manifest.warnings {
                warn!("{w}");
            }
            println!(
                "{}: {} artifacts in {}",
                manifest.kind,
                manifest.artifacts.len(),
                cfg.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
