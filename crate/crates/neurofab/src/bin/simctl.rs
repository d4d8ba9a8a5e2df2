//! Thin CLI over the library: run, validate, bench and sweep configured
//! networks. Exit codes: 0 success, 2 validation failure, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use neurofab::error::Error;
use neurofab::{load_config_file, run_precision_sweep, run_simulation, RunOptions};

#[derive(Parser)]
#[command(name = "simctl", version, about = "Neuromorphic array emulator control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Network configuration (TOML).
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the run length in ticks.
    #[arg(long)]
    ticks: Option<u64>,
    /// Output directory for raster.csv / stats.json.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for engines with tick-level parallelism.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured network and write raster + stats.
    Run {
        #[command(flatten)]
        opts: CommonOpts,
        /// Include wall-clock timing in stats.json (breaks byte
        /// reproducibility of the stats file).
        #[arg(long)]
        timing: bool,
    },
    /// Parse and validate a configuration, reporting every problem.
    Validate {
        /// Network configuration (TOML).
        config: PathBuf,
    },
    /// Run a configuration and report throughput.
    Bench {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run the crossbar conductance-precision sweep and write sweep.csv.
    Sweep {
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Validation(_) | Error::ConfigParse(_) => 2,
        _ => 3,
    }
}

fn run_options(opts: &CommonOpts, timing: bool) -> RunOptions {
    RunOptions {
        seed: opts.seed,
        ticks: opts.ticks,
        out_dir: opts.out_dir.clone(),
        workers: opts.workers,
        timing,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { opts, timing } => load_config_file(&opts.config).and_then(|config| {
            let artifacts = run_simulation(&config, &run_options(opts, *timing))?;
            println!("raster: {}", artifacts.raster_path.display());
            println!("stats:  {}", artifacts.stats_path.display());
            println!(
                "spikes: {}  synaptic events: {}  energy: {:.3} uJ",
                artifacts.stats.spikes,
                artifacts.stats.synaptic_events,
                artifacts.stats.energy.total_uj
            );
            Ok(())
        }),
        Command::Validate { config } => load_config_file(config).map(|cfg| {
            println!("OK: engine `{}`, format v{}", cfg.engine, cfg.format_version);
        }),
        Command::Bench { opts } => load_config_file(&opts.config).and_then(|config| {
            let artifacts = run_simulation(&config, &run_options(opts, true))?;
            let timing = artifacts.stats.timing.expect("bench always times");
            println!(
                "processed {} synaptic events in {:.3} s ({:.0} events/s)",
                artifacts.stats.synaptic_events, timing.wall_clock_s, timing.events_per_sec
            );
            Ok(())
        }),
        Command::Sweep { opts } => load_config_file(&opts.config).and_then(|config| {
            let path = run_precision_sweep(&config, &run_options(opts, false))?;
            println!("sweep: {}", path.display());
            Ok(())
        }),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
