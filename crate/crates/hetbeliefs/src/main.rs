//! Command-line front end: reads a config file, runs the selected mode,
//! and maps failures to exit codes (2 config/I/O, 3 model, 4 check
//! violations).

use clap::Parser;
use hetbeliefs::config::parse_config;
use hetbeliefs::run::{execute, RunError};

/// Four-period asset-pricing equilibrium under heterogeneous supply-variance
/// beliefs: closed-form solves, predictability measures, Monte Carlo
/// verification, parameter sweeps, and a randomized self-check battery.
#[derive(Parser)]
#[command(name = "hetbeliefs", version)]
struct Cli {
    /// Run configuration file (flat `key = value` lines).
    config: std::path::PathBuf,
    /// Accept configs where informed agents share the true supply variance
    /// instead of overstating it.
    #[arg(long)]
    allow_homogeneous: bool,
}

fn main() {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            std::process::exit(2);
        }
    };
    let cfg = match parse_config(&text, cli.allow_homogeneous) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    match execute(&cfg) {
        Ok(code) => std::process::exit(code),
        Err(RunError::Model(e)) => {
            eprintln!("error: {e}");
            std::process::exit(3);
        }
        Err(RunError::Io(e)) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
