use std::path::PathBuf;
use std::process::ExitCode;

use autobid_cli::commands::{
    oracle_summary, probe_summary, run_summary, sweep_summary, write_run, write_sweep,
};
use autobid_cli::config::Seeds;
use autobid_cli::{cmd_oracle, cmd_probe, cmd_run, cmd_sweep, CliError, ExperimentConfig, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "autobid",
    version,
    about = "Budget- and ROI-constrained bidding experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write per-round traces.
    Run(Common),
    /// Run a config over several horizons and fit the regret slope.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides the `[sweep]` horizons.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
    },
    /// Print the benchmark OPT of a config.
    Oracle(Common),
    /// Run the invariant suites.
    Probe {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Runs this single seed instead of the configured ones.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seeds = Seeds::List(vec![seed]);
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let (bench, outcomes) = cmd_run(&cfg, common.threads)?;
            match &cfg.output {
                Some(dir) => {
                    write_run(dir, &cfg, &bench, &outcomes)?;
                    println!("wrote {} traces to {}", outcomes.len(), dir.display());
                }
                None => print!("{}", run_summary(&cfg, &bench, &outcomes)),
            }
        }
        Command::Sweep { common, horizons } => {
            let cfg = common.load()?;
            let horizons = horizons.unwrap_or_else(|| cfg.horizons());
            let report = cmd_sweep(&cfg, &horizons, common.threads)?;
            print!("{}", sweep_summary(&report));
            if let Some(dir) = &cfg.output {
                write_sweep(dir, &report)?;
            }
        }
        Command::Oracle(common) => {
            let cfg = common.load()?;
            let bench = cmd_oracle(&cfg)?;
            print!("{}", oracle_summary(&cfg, &bench));
        }
        Command::Probe { seed } => {
            let reports = cmd_probe(seed)?;
            print!("{}", probe_summary(&reports));
            let failed: Vec<&str> = reports
                .iter()
                .filter(|r| !r.passed())
                .map(|r| r.name)
                .collect();
            if !failed.is_empty() {
                return Err(CliError::Invariant(format!(
                    "failed suites: {}",
                    failed.join(", ")
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
