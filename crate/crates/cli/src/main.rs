use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use r2d_cli::config::{load, Kind, Overrides, SpamMode};
use r2d_cli::manifest::{reproduce, run};
use r2d_cli::schema::SCHEMAS;

#[derive(Parser)]
#[command(name = "r2d", version, about = "Simulated transmon gate experiments")]
struct Cli {
    /// Output root; each run gets its own directory below it.
    #[arg(long, global = true, env = "R2D_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(RunArgs),
    /// Repeat the run recorded in a manifest and compare its artifacts.
    Reproduce {
        /// manifest.json or the run directory holding it.
        manifest: PathBuf,
    },
    /// Print the CSV column layouts.
    Schemas,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    spam: Option<SpamMode>,
    /// Pulse length, e.g. 7ns.
    #[arg(long)]
    tp: Option<String>,
    /// α12,α02,α13.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Option<Vec<f64>>,
    /// Target rotation, X or X/2.
    #[arg(long)]
    gate: Option<String>,
    /// Gate library JSON written by `run calibrate`.
    #[arg(long)]
    gates: Option<PathBuf>,
    /// Leakage level (2 or 3).
    #[arg(long)]
    level: Option<usize>,
    /// Set any configuration key, e.g. options.rb.sequences=20.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

const DEFAULT_ROOT: &str = "r2d-out";

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let cwd = match std::env::current_dir() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match cli.command {
        Command::Schemas => {
            for s in SCHEMAS {
                println!("{}: {}\n  {}", s.file, s.columns.join(","), s.description);
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => {
            let overrides = Overrides {
                seed: args.seed,
                spam: args.spam,
                tp: args.tp,
                alpha: args.alpha,
                gate: args.gate,
                gates: args.gates,
                level: args.level,
                set: args.set,
            };
            let cfg = match load(args.kind, args.config.as_deref(), &overrides, &cwd) {
                Ok(c) => c,
                Err(violations) => {
                    eprintln!("invalid configuration ({} problem{}):", violations.len(), if violations.len() == 1 { "" } else { "s" });
                    for v in violations {
                        eprintln!("  - {v}");
                    }
                    return ExitCode::from(2);
                }
            };
            let root = cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT));
            match run(&cfg, &cwd.join(root), cli.jobs) {
                Ok(r) => {
                    println!("{}", r.dir.display());
                    println!("{}", serde_json::to_string_pretty(&r.summary).unwrap_or_default());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Reproduce { manifest } => {
            let root = cli.out.unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT).join("reproduced"));
            match reproduce(&cwd.join(&manifest), &cwd.join(root), cli.jobs) {
                Ok((r, diffs)) if diffs.is_empty() => {
                    println!("{}", r.dir.display());
                    println!("all {} artifacts reproduced", r.manifest.artifacts.len());
                    ExitCode::SUCCESS
                }
                Ok((r, diffs)) => {
                    println!("{}", r.dir.display());
                    for d in diffs {
                        eprintln!("mismatch: {d}");
                    }
                    ExitCode::FAILURE
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
