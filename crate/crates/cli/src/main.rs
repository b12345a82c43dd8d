use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use nhmc_cli::commands::{ergm, potts, ratio_study, validate};
use nhmc_cli::config::{ConfigMap, Overrides};
use nhmc_cli::report::configure_workers;

/// Samplers for doubly-intractable posteriors over Gibbs random fields:
/// validation suite, ratio-estimator study, and the lattice and network
/// experiments.
#[derive(Parser)]
#[command(name = "nhmc", version, about)]
struct Cli {
    /// Flat key=value configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (all randomness derives from it).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = library default).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Echo the resolved configuration and planned work, then exit.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the numerical self-checks (oracle equivalence, estimator
    /// unbiasedness, integrator identities, Gaussian moments).
    Validate {
        /// Deliberately corrupt a named check to exercise failure paths.
        #[arg(long, value_name = "CHECK")]
        inject_fault: Option<String>,
    },
    /// Compare the endpoint and path-wise ratio estimators along
    /// Hamiltonian paths against the exact partition ratio.
    RatioStudy,
    /// The lattice experiment with exact ground truth.
    Potts,
    /// The network experiment (karate club by default configuration,
    /// tiny simulated graphs with enumeration ground truth otherwise).
    Ergm,
}

fn load_map(cli: &Cli) -> Result<ConfigMap> {
    let mut map = match &cli.config {
        Some(path) => ConfigMap::from_file(path)?,
        None => ConfigMap::default(),
    };
    Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        workers: cli.workers,
        dry_run: cli.dry_run,
    }
    .apply(&mut map);
    Ok(map)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut map = load_map(&cli)?;
    match &cli.command {
        Command::Validate { inject_fault } => {
            let config = validate::ValidateConfig::from_map(&mut map, inject_fault.clone())?;
            configure_workers(config.workers);
            let results = validate::cmd_validate(&config)?;
            let failed: Vec<&str> = results
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.name.as_str())
                .collect();
            if failed.is_empty() {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failed checks: {}", failed.join(", "));
                Ok(ExitCode::FAILURE)
            }
        }
        Command::RatioStudy => {
            let config = ratio_study::RatioStudyConfig::from_map(&mut map)?;
            configure_workers(config.workers);
            ratio_study::cmd_ratio_study(&config, cli.dry_run)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Potts => {
            let config = potts::PottsConfig::from_map(&mut map)?;
            configure_workers(config.workers);
            potts::cmd_potts(&config, cli.dry_run)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ergm => {
            let config = ergm::ErgmConfig::from_map(&mut map)?;
            configure_workers(config.workers);
            ergm::cmd_ergm(&config, cli.dry_run)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
