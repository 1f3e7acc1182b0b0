use bcs_cli::config::{ExperimentConfig, ExperimentKind, Overrides};
use bcs_cli::report::fmt_snr;
use bcs_cli::{run_experiment, write_reports, CliError};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "bcs", about = "signal recovery experiments", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its reports.
    Run {
        /// Experiment name, e.g. fbcs-noise or comparative.
        experiment: String,
        /// Optional key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed for data generation.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for trials.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory for the CSV reports.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated SNR levels in dB, `inf` for noiseless.
        #[arg(long)]
        snr: Option<String>,
        /// Single sparsity level, replacing any sweep.
        #[arg(long)]
        k: Option<usize>,
        /// Signals per trial, replacing any sweep.
        #[arg(long)]
        signals: Option<usize>,
        /// Independent trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// List the available experiments.
    List,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::List => {
            for (name, _) in bcs_cli::config::EXPERIMENT_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Cmd::Run {
            experiment,
            config,
            seed,
            jobs,
            out,
            snr,
            k,
            signals,
            trials,
        } => {
            let kind = ExperimentKind::parse(&experiment)?;
            let over = Overrides {
                seed,
                jobs,
                out,
                snr,
                k,
                signals,
                trials,
            };
            let cfg = ExperimentConfig::build(kind, config.as_deref(), &over)?;
            eprintln!(
                "running {} (seed {}, trials {}, k {:?}, signals {:?}, snr [{}])",
                kind.name(),
                cfg.seed,
                cfg.trials,
                cfg.k_list,
                cfg.signals_list,
                cfg.snr_list
                    .iter()
                    .map(|&s| fmt_snr(s))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            let mut run = run_experiment(&cfg)?;
            let written = write_reports(kind, &cfg.output_dir, &mut run)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
