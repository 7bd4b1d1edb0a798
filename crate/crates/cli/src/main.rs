mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Loaded;
use crate::error::{CliError, Result};
use crate::output::RunDir;

/// Simulate and optimize EIT light storage in a lambda-type atomic vapor.
#[derive(Parser)]
#[command(name = "eitmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write, store and retrieve one signal pulse.
    Simulate(RunArgs),
    /// Optimize the input signal by iterated time reversal.
    Iterate(RunArgs),
    /// Optimize the writing control for given input signals.
    OptimizeControl(RunArgs),
    /// Efficiency against optical depth for several control powers.
    Scan(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output root; overrides the config's `output_dir` and `EITMEM_OUT`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run directory name; defaults to the config's `run_id`, then to a
    /// prefix of the config hash.
    #[arg(long)]
    run_id: Option<String>,
}

fn output_root(args: &RunArgs, cfg: &Loaded) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    if let Some(dir) = &cfg.config.output_dir {
        return cfg.resolve(dir);
    }
    match std::env::var_os("EITMEM_OUT") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from("runs"),
    }
}

fn execute(
    name: &str,
    args: &RunArgs,
    run: fn(&Loaded, &mut RunDir) -> Result<commands::Report>,
) -> Result<()> {
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::config("--jobs", "must be at least 1"));
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let cfg = config::load(&args.config)?;
    let run_id = args
        .run_id
        .clone()
        .or_else(|| cfg.config.run_id.clone())
        .unwrap_or_else(|| format!("run-{}", &cfg.hash[..12]));
    let root = output_root(args, &cfg);
    let mut dir = RunDir::create(&root, &run_id, &cfg.hash)?;
    dir.json("config.json", &cfg.config)?;
    let report = run(&cfg, &mut dir)?;
    for line in &report.lines {
        println!("{line}");
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{name}: wrote {} artifacts to {}{}",
        dir.artifacts().len(),
        display(&dir.dir),
        if report.warnings.is_empty() {
            String::new()
        } else {
            format!(" ({} warnings)", report.warnings.len())
        }
    );
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => execute("simulate", a, commands::simulate::run),
        Command::Iterate(a) => execute("iterate", a, commands::iterate::run),
        Command::OptimizeControl(a) => execute("optimize-control", a, commands::optimize::run),
        Command::Scan(a) => execute("scan", a, commands::scan::run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
