use std::path::PathBuf;
use std::process::ExitCode;

use carts::commands::{self, parse_schedulers};
use carts::config::{self, parse_sweep};
use carts::core::harness::ExperimentConfig;
use carts::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "carts", version, about = "DMRS-aware SRS triggering and sub-band CSI stitching emulator")]
struct Cli {
    /// More logging (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat an experiment over values of one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `name=v1,v2,...`, e.g. `n_ues=5,10,20,50,100`.
        #[arg(long)]
        param: String,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Paired runs that differ only in the scheduler.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "carts,periodic")]
        schedulers: String,
        #[arg(long, default_value = "compare")]
        out: PathBuf,
    },
}

fn base_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => config::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = config::load(&config)?;
            let s = commands::run(&cfg, &out)?;
            let a = &s.summary;
            println!(
                "{} rounds, {} stitches: NMSE median {:.4}, CIR within 2 taps {:.1}%, {:.1} est/s, tracking {:.3} m",
                s.rounds,
                a.stitches,
                a.nmse_median,
                100.0 * a.cir_within_2_taps,
                a.est_rate_hz_mean,
                a.tracking_error_mean_m
            );
        }
        Command::Sweep { config, param, out } => {
            let cfg = base_config(config.as_ref())?;
            let (name, values) = parse_sweep(&param)?;
            for row in commands::sweep(&cfg, &name, &values, &out)? {
                println!(
                    "{}={}: NMSE mean {:.4}, {:.1} est/s, tracking {:.3} m",
                    row.param, row.value, row.nmse_mean, row.est_rate_hz_mean, row.tracking_error_mean_m
                );
            }
        }
        Command::Compare { config, schedulers, out } => {
            let cfg = base_config(config.as_ref())?;
            for s in commands::compare(&cfg, &parse_schedulers(&schedulers)?, &out)? {
                let a = &s.summary;
                println!(
                    "{}: NMSE median {:.4}, {:.1} est/s, tracking {:.3} m (smoothed {:.3} m)",
                    s.scheduler, a.nmse_median, a.est_rate_hz_mean, a.tracking_error_mean_m, a.smoothed_tracking_error_mean_m
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
