//! Command-line front end for the self-improvement laboratory.
//!
//! Commands operate on a run directory. `iterate` performs whole runs; the
//! staged commands (`gen-prompts` through `train`) execute one round step by
//! step through files, drawing on the same library code and random streams,
//! so both routes produce identical artifacts. Errors leave a single JSON
//! line on stderr so scripted callers can branch on the failure kind.

mod commands;
mod config;
mod store;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alignlab_core::pipeline::RunConfig;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "alignlab", version, about = "Self-improvement laboratory for toy generative policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the current round's training prompts to prompts.jsonl
    GenPrompts(CommonArgs),
    /// Sample candidate representations for prompts.jsonl into samples.jsonl
    Sample(CommonArgs),
    /// Score every candidate by decompositional self-feedback into scores.jsonl
    Score(CommonArgs),
    /// Turn scores.jsonl into preference pairs in pairs.jsonl
    MakePairs(CommonArgs),
    /// Run one preference-optimization round and advance the checkpoint
    Train(CommonArgs),
    /// Run the configured number of improvement rounds from scratch
    Iterate(CommonArgs),
    /// Evaluate the checkpoint policy on the held-out prompt set
    Eval(CommonArgs),
    /// Train a grid of config variants and compare their improvements
    Sweep(SweepArgs),
    /// Render charts and a text summary from a run directory (read-only)
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; missing fields fall back to the mode's defaults
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed from which every stream seed is rederived
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Run directory the command reads and writes
    #[arg(long, value_name = "DIR", default_value = "run")]
    out: PathBuf,

    /// Dotted-path config override, e.g. dpo.beta=0.1 (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Which configuration axis to sweep
    #[arg(long, value_enum)]
    grid: GridKind,

    /// Rank window LO..HI for the negative-range grid (repeatable)
    #[arg(long, value_name = "LO..HI")]
    window: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory to render
    #[arg(long, value_name = "DIR", default_value = "run")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GridKind {
    /// All aggregation/distance kernel combinations
    Kernel,
    /// Every feedback mode, including the random-score control
    Feedback,
    /// Alternative rejected-rank windows (requires --window)
    NegativeRange,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let envelope = serde_json::json!({
                "error": true,
                "kind": classify(&err),
                "message": format!("{err:#}"),
            });
            eprintln!("{envelope}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenPrompts(args) => mutating(&args, commands::stage::gen_prompts),
        Command::Sample(args) => mutating(&args, commands::stage::sample),
        Command::Score(args) => mutating(&args, commands::stage::score),
        Command::MakePairs(args) => mutating(&args, commands::stage::make_pairs),
        Command::Train(args) => mutating(&args, commands::stage::train),
        Command::Iterate(args) => mutating(&args, commands::run::iterate),
        Command::Eval(args) => mutating(&args, commands::run::eval),
        Command::Sweep(args) => {
            let windows = args
                .window
                .iter()
                .map(|w| parse_window(w))
                .collect::<Result<Vec<_>>>()?;
            mutating(&args.common, |cfg, out| {
                commands::run::sweep(cfg, out, args.grid, &windows)
            })
        }
        Command::Report(args) => commands::report::report(&args.out),
    }
}

/// Shared prologue for every command that writes into the run directory:
/// resolve the config, then hold the directory lock for the body's duration.
fn mutating(args: &CommonArgs, body: impl FnOnce(&RunConfig, &Path) -> Result<()>) -> Result<()> {
    let cfg = config::load(args.config.as_deref(), &args.overrides, args.seed)?;
    let _lock = store::DirLock::acquire(&args.out)?;
    body(&cfg, &args.out)
}

fn parse_window(text: &str) -> Result<(usize, usize)> {
    let Some((lo, hi)) = text.split_once("..") else {
        bail!("window '{text}' must look like LO..HI");
    };
    let lo = lo.trim().parse().with_context(|| format!("window '{text}'"))?;
    let hi = hi.trim().parse().with_context(|| format!("window '{text}'"))?;
    Ok((lo, hi))
}

/// Stable failure tag for the stderr envelope. The first recognizable cause
/// in the chain wins, so wrapped library errors keep their own kind.
fn classify(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if cause.downcast_ref::<store::LockedError>().is_some() {
            return "locked";
        }
        if let Some(core) = cause.downcast_ref::<alignlab_core::Error>() {
            return core.kind();
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "json";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "cli"
}
