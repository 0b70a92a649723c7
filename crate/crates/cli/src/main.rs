//! `kinkopt`: solve, price and compare on binomial lattices from a TOML
//! config.
//!
//! Exit codes: 0 success, 1 compare tolerance exceeded (the report is still
//! written), 2 configuration or runtime error (nothing is written).

mod commands;
mod config;
mod model;
mod output;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use commands::{Overrides, Run};
use config::{Format, RunConfig};
use kinkopt::oracle::KraftGrouping;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "kinkopt", version, about = "Exact lattice portfolio optimisation and indifference pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Value function and optimal policy at one node.
    Solve(Args),
    /// Indifference prices and hedge deltas for the configured claim.
    Price(Args),
    /// Engine against the closed-form or Monte Carlo oracle.
    Compare(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides `output.path`. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Pruning tolerance per step; overrides `solver.eps_step`.
    #[arg(long)]
    eps: Option<f64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Monte Carlo seed; overrides `oracle.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    kraft_grouping: Option<Grouping>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Grouping {
    A,
    B,
}

impl From<Grouping> for KraftGrouping {
    fn from(g: Grouping) -> Self {
        match g {
            Grouping::A => KraftGrouping::A,
            Grouping::B => KraftGrouping::B,
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (Command::Solve(args) | Command::Price(args) | Command::Compare(args)) = &cli.command;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start the thread pool")?;
    }
    let cfg = RunConfig::load(&args.config)?;
    let format = args.format.unwrap_or(cfg.output.format);
    anyhow::ensure!(
        !cfg.output.surface || format == Format::Json,
        "output.surface needs the json format"
    );
    let out = args.out.clone().or_else(|| cfg.output.path.clone().map(PathBuf::from));
    let run = Run::new(
        cfg,
        Overrides {
            eps: args.eps,
            seed: args.seed,
            kraft_grouping: args.kraft_grouping.map(Into::into),
        },
    )?;
    let started = std::time::Instant::now();
    let (table, pass) = match cli.command {
        Command::Solve(_) => (commands::solve(&run)?, true),
        Command::Price(_) => (commands::price(&run)?, true),
        Command::Compare(_) => commands::compare(&run)?,
    };
    log::info!("finished in {:.2}s", started.elapsed().as_secs_f64());
    output::emit(&table.render(format)?, out.as_deref())?;
    Ok(pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("kinkopt: tolerance exceeded");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("kinkopt: {e:#}");
            ExitCode::from(2)
        }
    }
}
