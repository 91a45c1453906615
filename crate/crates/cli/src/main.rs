//! `bathcorr` command-line driver.
//!
//! Exit codes: 0 success, 2 config or usage error, 3 numerical failure, 1 I/O.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use commands::{CommandName, RunError};
use config::{Config, ConfigError, SCHEMA_VERSION};
use output::{Format, Output};

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "bathcorr", version, about = "Bath correlation functions with non-ergodic offsets")]
struct Cli {
    #[command(subcommand)]
    command: CommandName,

    /// Config file (`key = value` lines or a flat JSON object)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed; overrides `seed` in the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
}

fn exit_code(e: &RunError) -> u8 {
    match e {
        RunError::Config(_) => 2,
        RunError::Numerical(bathcorr::Error::InvalidParameter { .. }) => 2,
        RunError::Numerical(_) => 3,
        RunError::Io(_) => 1,
    }
}

fn error_payload(e: &RunError) -> Value {
    match e {
        RunError::Config(c) => json!({
            "kind": "config",
            "key": c.key,
            "line": c.line,
            "message": c.message,
        }),
        RunError::Numerical(n) => json!({
            "kind": if exit_code(e) == 2 { "config" } else { "numerical" },
            "message": n.to_string(),
            "detail": format!("{n:?}"),
        }),
        RunError::Io(io) => json!({ "kind": "io", "message": io.to_string() }),
    }
}

fn prepare(cli: &Cli) -> Result<(Config, u64), ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let from_file = cfg.u64("seed", DEFAULT_SEED)?;
    cfg.forget("seed");
    Ok((cfg, cli.seed.unwrap_or(from_file)))
}

fn run(cli: &Cli) -> Result<Output, RunError> {
    let (mut cfg, seed) = prepare(cli)?;
    let experiment = commands::read(cli.command, &mut cfg, seed)?;
    cfg.finish()?;

    let mut out = Output::create(&cli.out, cli.format)?;
    let resolved = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cli.command,
        "seed": seed,
        "format": cli.format,
        "params": cfg.resolved(),
    });
    out.always_json("resolved_config.json", &resolved)?;
    if let Err(e) = experiment.run(&mut out) {
        let _ = out.always_json("error.json", &error_payload(&e));
        return Err(e);
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(out) => {
            for f in out.written() {
                println!("{}", cli.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
