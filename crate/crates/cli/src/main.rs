use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stable_brw_cli::commands::Command;
use stable_brw_cli::config::ExperimentConfig;

/// Verification experiments for branching random walks with a stable spine.
#[derive(Parser)]
#[command(name = "stable-brw", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parametrization round trips, sampler CF and E[X⁺].
    StableCheck(RunArgs),
    /// Ladder heights, renewal function and harmonicity.
    Renewal(RunArgs),
    /// Meander constant κ and the survival scaling.
    Kappa(RunArgs),
    /// Martingale means, Z_n diagnostics and the barrier comparison.
    Brw(RunArgs),
    /// The ratio a_n^{αρ̄} W_n / Z_n on surviving runs.
    SenetaHeyde(RunArgs),
    /// Many-to-one checks and the spine marginal.
    Mto(RunArgs),
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Size of the command's main ensemble.
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory (default results/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::StableCheck(a) => (Command::StableCheck, a),
        Cmd::Renewal(a) => (Command::Renewal, a),
        Cmd::Kappa(a) => (Command::Kappa, a),
        Cmd::Brw(a) => (Command::Brw, a),
        Cmd::SenetaHeyde(a) => (Command::SenetaHeyde, a),
        Cmd::Mto(a) => (Command::Mto, a),
        Cmd::DefaultConfig => {
            print!("{}", ExperimentConfig::default().to_toml());
            return ExitCode::SUCCESS;
        }
    };
    let config = match args.config.as_deref().map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load) {
        Ok(mut c) => {
            if let Some(n) = args.replicas {
                cmd.set_replicas(&mut c, n);
            }
            c
        }
        Err(e) => return usage_error(&e.to_string()),
    };
    if let Err(e) = config.validate() {
        return usage_error(&e.to_string());
    }
    if args.threads == Some(0) {
        return usage_error("--threads must be at least 1");
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from("results").join(cmd.name()));
    match stable_brw_cli::run_command(cmd, config, args.seed, args.threads, Some(&out)) {
        Ok(bundle) => {
            print!("{}", bundle.report());
            println!("{} in {:.1} s, results in {}", cmd, bundle.runtime_s, out.display());
            if bundle.pass {
                ExitCode::SUCCESS
            } else {
                println!("some checks failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}
