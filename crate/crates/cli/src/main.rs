//! Command-line front end for the concave-convex boundary value problem
//! toolkit: time-map curves, bifurcation diagrams, solution profiles, and
//! verification suites.
//!
//! Exit codes: 0 success, 1 numeric/verification failure, 2 usage/config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{RunConfig, TaskBlock};
use output::Emitter;

#[derive(Parser)]
#[command(name = "ccbvp", version, about = "Concave-convex BVP toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-map curves T_lambda(alpha) with maximizer / dead-core markers
    Timemap(CommonArgs),
    /// Bifurcation-diagram branch tables via continuation
    Diagram(CommonArgs),
    /// Solution profile traces (and radial pullback in annulus mode)
    Profiles(CommonArgs),
    /// Invariant verification suites with a JSON margin report
    Verify(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory
    #[arg(long)]
    outdir: Option<PathBuf>,
}

/// A command failure with its process exit code.
pub struct CmdError {
    pub code: u8,
    pub msg: String,
}

impl CmdError {
    fn numeric(e: ccbvp_core::Error) -> Self {
        CmdError { code: 1, msg: e.to_string() }
    }

    fn io(e: std::io::Error) -> Self {
        CmdError { code: 1, msg: format!("io error: {e}") }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (name, args, expects) = match &cli.command {
        Command::Timemap(a) => ("timemap", a, "timemap"),
        Command::Diagram(a) => ("diagram", a, "diagram"),
        Command::Profiles(a) => ("profiles", a, "profiles"),
        Command::Verify(a) => ("verify", a, "verify"),
    };

    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let task_name = match &cfg.task {
        TaskBlock::Timemap(_) => "timemap",
        TaskBlock::Diagram(_) => "diagram",
        TaskBlock::Profiles(_) => "profiles",
        TaskBlock::Verify(_) => "verify",
    };
    if task_name != expects {
        eprintln!("error: config task block is '{task_name}' but the subcommand is '{name}'");
        return ExitCode::from(2);
    }

    let outdir = args.outdir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut em = match Emitter::new(&outdir, name, &cfg.output.formats) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: cannot create output directory: {e}");
            return ExitCode::from(1);
        }
    };

    let result = match &cfg.task {
        TaskBlock::Timemap(t) => commands::timemap::run(&cfg, t, &mut em),
        TaskBlock::Diagram(t) => commands::diagram::run(&cfg, t, &mut em),
        TaskBlock::Profiles(t) => commands::profiles::run(&cfg, t, &mut em),
        TaskBlock::Verify(t) => commands::verify::run(&cfg, t, &mut em),
    };
    match result {
        Ok(()) => {
            for path in &em.written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
