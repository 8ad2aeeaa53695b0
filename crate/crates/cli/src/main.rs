use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use swapregret_cli::{run_experiment, CliError, CliResult, ConfigFile, ExperimentConfig, Params};

/// Run a seeded swap-regret experiment and write its CSV artifacts.
#[derive(Debug, Parser)]
#[command(name = "swapregret", version)]
struct Args {
    /// regret-curve | eq3-check | hardseq | nfg-dynamics | comm | sparsify | efg-nfce | twocoin
    #[arg(long)]
    experiment: Option<String>,
    /// TOML file whose values override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of actions.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Branching factor (hardseq) or samples per day (dynamics, comm, efg-nfce).
    #[arg(long = "K")]
    k: Option<usize>,
    /// Tree depth (hardseq).
    #[arg(long = "L")]
    l: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    /// Inner horizon of the multi-scale learner.
    #[arg(long = "H")]
    h: Option<u64>,
    /// Number of scales of the multi-scale learner.
    #[arg(long = "S")]
    s: Option<u32>,
    #[arg(long)]
    players: Option<usize>,
    /// Independent seeded repetitions.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    days: Option<u64>,
    /// Infosets per player (efg-nfce).
    #[arg(long)]
    infosets: Option<usize>,
    /// Sparsification draws per game (sparsify).
    #[arg(long)]
    repeats: Option<usize>,
    /// random | bernoulli | adaptive
    #[arg(long)]
    adversary: Option<String>,
    /// exact | sampled (nfg-dynamics)
    #[arg(long)]
    mode: Option<String>,
    /// Draw separate opponent samples for every player.
    #[arg(long)]
    unshared: bool,
}

impl Args {
    fn into_config(self) -> CliResult<ExperimentConfig> {
        let file = self.config.as_deref().map(ConfigFile::load).transpose()?;
        let flags = ConfigFile {
            experiment: self.experiment,
            seed: self.seed,
            out: self.out,
            params: Params {
                n: self.n,
                eps: self.eps,
                k: self.k,
                l: self.l,
                delta: self.delta,
                h: self.h,
                s: self.s,
                players: self.players,
                runs: self.runs,
                days: self.days,
                infosets: self.infosets,
                repeats: self.repeats,
                adversary: self.adversary,
                mode: self.mode,
                shared: self.unshared.then_some(false),
            },
        };
        ExperimentConfig::resolve(flags, file)
    }
}

fn configure_workers() -> CliResult<()> {
    let Ok(value) = std::env::var(swapregret_cli::WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = value
        .parse()
        .map_err(|_| CliError::Usage(format!("{} must be a positive integer, got '{value}'", swapregret_cli::WORKERS_ENV)))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    Ok(())
}

fn run(args: Args) -> CliResult<()> {
    configure_workers()?;
    let config = args.into_config()?;
    let report = run_experiment(&config)?;
    for file in &report.files {
        println!("{}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("swapregret: {line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
