//! `augprobe` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! The worker thread count comes from `--threads`, else `AUGPROBE_THREADS`,
//! else rayon's default. Results do not depend on it.

mod augment;
mod config;
mod error;
mod evalgrid;
mod probes;
mod report;
mod synth;

use std::io::Write as _;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

const THREADS_ENV: &str = "AUGPROBE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "augprobe", version, about = "Diagnostics for augmentation overfitting")]
struct Cli {
    /// Worker threads (overrides AUGPROBE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean-vs-augmented discriminator accuracy and proxy divergence per layer.
    Divergence(probes::DivergenceArgs),
    /// Specific/common decomposition of per-domain softmax classifiers.
    Csd(probes::CsdArgs),
    /// Augment PNG images.
    Augment(augment::AugmentArgs),
    /// Accuracy grid over severity and mixing mode on synthetic shapes.
    Evalgrid(evalgrid::EvalgridArgs),
    /// Merge saved JSON reports into markdown tables.
    Report(report::ReportArgs),
    /// Write synthetic dumps and a manifest.
    #[command(subcommand)]
    Synth(synth::SynthCommand),
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::usage(format!("{THREADS_ENV} must be a thread count, got {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::usage("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<String> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Divergence(a) => probes::cmd_divergence(a),
        Command::Csd(a) => probes::cmd_csd(a),
        Command::Augment(a) => augment::cmd_augment(a),
        Command::Evalgrid(a) => evalgrid::cmd_evalgrid(a),
        Command::Report(a) => report::cmd_report(a),
        Command::Synth(c) => synth::cmd_synth(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
