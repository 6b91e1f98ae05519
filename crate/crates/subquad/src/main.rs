//! Command-line entry point for the experiment runner.
//!
//! Exit code 0 means the config was valid and every acceptance threshold in it
//! passed; 1 means a threshold failed; 2 means the invocation itself was bad.
//! The worker-pool size is taken from SUBQUAD_WORKERS (default: all cores);
//! output bytes do not depend on it.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use subquad::experiment::{builtin_presets, canonical_toml, run_experiment, validate_config};

#[derive(Parser)]
#[command(name = "subquad", version, about = "Deterministic SGD experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Replace the desk-scale counts with the config's paper-scale
        /// section.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Parse and validate a config, printing every diagnostic.
    Validate { config: PathBuf },
    /// Inspect the shipped experiment catalog.
    Presets {
        #[command(subcommand)]
        cmd: PresetsCmd,
    },
}

#[derive(Subcommand)]
enum PresetsCmd {
    /// List the preset names.
    List,
    /// Print one preset in its canonical TOML form.
    Show { name: String },
}

fn init_workers() {
    if let Ok(value) = std::env::var("SUBQUAD_WORKERS") {
        match value.parse::<usize>() {
            Ok(n) if n >= 1 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("worker pool initializes once");
            }
            _ => {
                eprintln!("SUBQUAD_WORKERS must be a positive integer, got {value:?}");
                std::process::exit(2);
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_workers();
    match cli.cmd {
        Cmd::Run { config, paper_scale } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let mut cfg = match validate_config(&text) {
                Ok(c) => c,
                Err(diags) => {
                    for d in &diags {
                        eprintln!("error: {d}");
                    }
                    return ExitCode::from(2);
                }
            };
            if paper_scale {
                cfg.apply_paper_scale();
            }
            match run_experiment(&cfg) {
                Ok(summary) => {
                    for m in &summary.metrics {
                        println!("{} = {}", m.name, m.value);
                    }
                    for c in &summary.checks {
                        println!("[{}] {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
                    }
                    for file in &summary.files {
                        println!("wrote {}", file.display());
                    }
                    if summary.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Cmd::Validate { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            match validate_config(&text) {
                Ok(cfg) => {
                    println!("ok: {} ({})", cfg.name, cfg.kind);
                    ExitCode::SUCCESS
                }
                Err(diags) => {
                    for d in &diags {
                        eprintln!("error: {d}");
                    }
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Presets { cmd } => match cmd {
            PresetsCmd::List => {
                for (name, cfg) in builtin_presets() {
                    println!("{name}\t{}", cfg.kind);
                }
                ExitCode::SUCCESS
            }
            PresetsCmd::Show { name } => {
                match builtin_presets().into_iter().find(|(n, _)| *n == name) {
                    Some((_, cfg)) => {
                        print!("{}", canonical_toml(&cfg));
                        ExitCode::SUCCESS
                    }
                    None => {
                        eprintln!("unknown preset {name:?}; see `subquad presets list`");
                        ExitCode::from(2)
                    }
                }
            }
        },
    }
}
