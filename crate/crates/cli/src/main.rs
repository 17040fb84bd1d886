use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pixiso_cli::{
    cmd_baseline, cmd_export_mask, cmd_optimize, cmd_report, cmd_simulate, parse_config, parse_config_str,
    OptimizeOptions, Result, RunConfig,
};

#[derive(Parser)]
#[command(name = "pixiso", version, about = "Pixelated patch pair simulation and isolation optimization")]
struct Cli {
    /// Sectioned key = value config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides [swarm] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides [output] dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a P1 mask and its mirror image; writes simulate.s2p.
    Simulate { mask: PathBuf },
    /// Run the swarm with the field solver.
    Optimize {
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop (with a checkpoint) once this many iterations are done.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Standard patch dimensions and the all-ones pair.
    Baseline,
    /// Write a mask: `ones`, `zeros` or a bits_hex string.
    ExportMask {
        path: PathBuf,
        #[arg(long, default_value = "ones")]
        pattern: String,
    },
    /// Summarize a run directory (defaults to the configured output dir).
    Report { dir: Option<PathBuf> },
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => parse_config_str("")?,
    };
    if let Some(seed) = cli.seed {
        cfg.swarm.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String> {
    let cfg = load(&cli)?;
    match cli.command {
        Command::Simulate { mask } => cmd_simulate(&cfg, &mask),
        Command::Optimize { resume, stop_after } => {
            cmd_optimize(&cfg, &OptimizeOptions { resume, stop_after }).map(|o| o.report)
        }
        Command::Baseline => cmd_baseline(&cfg),
        Command::ExportMask { path, pattern } => cmd_export_mask(&cfg, &pattern, &path),
        Command::Report { dir } => cmd_report(&dir.unwrap_or(cfg.out_dir)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
