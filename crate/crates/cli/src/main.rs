use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use prising_cli::{
    format_report, run_audits, run_real_data, run_simulation, summarise, write_csv,
    write_csv_file, CliError, ExperimentConfig, Result, Study,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "prising", version, about = "Private Ising inverse-temperature experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimates across a grid of true inverse temperatures.
    BetaSweep {
        #[command(flatten)]
        common: Common,
        /// Also write per-grid-point means and spreads here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Mean squared error as the network grows.
    MseN {
        #[command(flatten)]
        common: Common,
        /// Also write the per-replicate rows here.
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// Mean squared error across Erdos-Renyi edge densities.
    MseDensity {
        #[command(flatten)]
        common: Common,
        /// Also write the per-replicate rows here.
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// Cost of privacy on an observed network and outcome vector.
    RealData {
        #[command(flatten)]
        common: Common,
        /// Edge list, overriding the config.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Outcomes file, overriding the config.
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
    /// Sensitivity, Jacobian-ratio and density-ratio audits.
    Audit {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
    /// Record per-replicate wall time. Makes output non-reproducible.
    #[arg(long)]
    timings: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn emit<T: Serialize>(&self, rows: &[T]) -> Result<()> {
        emit(rows, self.out.as_deref())
    }
}

fn emit<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => {
            write_csv_file(rows, path)?;
            info!("wrote {} row(s) to {}", rows.len(), path.display());
            Ok(())
        }
        None => write_csv(rows, std::io::stdout().lock()),
    }
}

fn simulation(common: &Common, study: Study) -> Result<Vec<prising_cli::ResultRow>> {
    run_simulation(&common.load()?, study, common.timings)
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::BetaSweep { common, summary } => {
            let rows = simulation(common, Study::BetaSweep)?;
            common.emit(&rows)?;
            if let Some(path) = summary {
                emit(&summarise(&rows), Some(path))?;
            }
        }
        Command::MseN { common, rows: raw } | Command::MseDensity { common, rows: raw } => {
            let study = if matches!(command, Command::MseN { .. }) {
                Study::MseN
            } else {
                Study::MseDensity
            };
            let rows = simulation(common, study)?;
            common.emit(&summarise(&rows))?;
            if let Some(path) = raw {
                emit(&rows, Some(path))?;
            }
        }
        Command::RealData {
            common,
            edges,
            outcomes,
        } => {
            let mut cfg = common.load()?;
            if edges.is_some() {
                cfg.edge_list.clone_from(edges);
            }
            if outcomes.is_some() {
                cfg.outcomes.clone_from(outcomes);
            }
            let out = run_real_data(&cfg)?;
            // The table goes to stdout when --out is absent, so keep the
            // human summary on stderr.
            eprintln!(
                "n = {}, edges = {}, non-private estimate = {:.6} ({:?})",
                out.n, out.edges, out.nonprivate.beta_hat, out.nonprivate.outcome
            );
            for r in &out.rows {
                eprintln!(
                    "  eps = {:<8} cost of privacy = {:.6e}  mean = {:.6}  sd = {:.6}",
                    r.epsilon, r.cost_of_privacy, r.mean_private, r.sd_private
                );
            }
            common.emit(&out.rows)?;
        }
        Command::Audit { common } => {
            let rows = run_audits(&common.load()?)?;
            let mut stderr = std::io::stderr().lock();
            let _ = stderr.write_all(format_report(&rows).as_bytes());
            common.emit(&rows)?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                return Err(CliError::AuditFailed { failed });
            }
        }
    }
    Ok(())
}

fn threads(command: &Command) -> Option<usize> {
    match command {
        Command::BetaSweep { common, .. }
        | Command::MseN { common, .. }
        | Command::MseDensity { common, .. }
        | Command::RealData { common, .. }
        | Command::Audit { common } => common.threads,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads(&cli.command) {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
