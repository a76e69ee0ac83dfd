//! `dlca`: runs channel-access experiments and writes their CSV tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dlca_core::scenario::{emit_csv, run_experiment_with, Experiment, RunReport, PRESETS, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "dlca", version, about = "Multi-AP channel-access simulator")]
struct Cli {
    /// Worker threads for Monte-Carlo trials (defaults to one per core).
    #[arg(long, global = true, env = WORKERS_ENV, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every point of an experiment file.
    Run {
        config: PathBuf,
        /// Output directory for summary.csv and trace.csv.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run an experiment with N or F replaced by a range, e.g. N=8..56:8.
    Sweep {
        config: PathBuf,
        #[arg(long = "param", required = true, value_parser = parse_param)]
        params: Vec<SweepParam>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Built-in experiments.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Check an experiment file without running it.
    Validate { config: PathBuf },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

#[derive(Debug, Clone, PartialEq)]
struct SweepParam {
    key: SweepKey,
    values: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SweepKey {
    N,
    F,
}

/// Parses `KEY=start..end[:step]`, end inclusive, or `KEY=a,b,c`.
fn parse_param(s: &str) -> Result<SweepParam, String> {
    let (key, range) = s.split_once('=').ok_or("expected KEY=start..end[:step]")?;
    let key = match key.trim() {
        "N" | "n_aps" => SweepKey::N,
        "F" | "n_channels" => SweepKey::F,
        other => return Err(format!("unknown sweep key '{other}', expected N or F")),
    };
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad number '{t}': {e}"));
    let values = if let Some((start, rest)) = range.split_once("..") {
        let (end, step) = match rest.split_once(':') {
            Some((e, st)) => (num(e)?, num(st)?),
            None => (num(rest)?, 1),
        };
        let start = num(start)?;
        if step == 0 {
            return Err("step must be positive".into());
        }
        if end < start {
            return Err(format!("empty range {start}..{end}"));
        }
        (start..=end).step_by(step).collect()
    } else {
        range.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    Ok(SweepParam { key, values })
}

fn load(path: &Path) -> Result<Experiment> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Experiment::from_json(&text).with_context(|| format!("invalid experiment {}", path.display()))
}

fn print_summary(reports: &[RunReport]) {
    println!(
        "{:<20} {:>4} {:>4} {:>14} {:>10} {:>10} {:>10} {:>9}",
        "protocol", "N", "F", "throughput", "utility", "coll/txop", "idle/txop", "wall_s"
    );
    for r in reports {
        let c = &r.config;
        let utility = r.mean.utility.map_or("-".to_string(), |u| format!("{u:.4}"));
        println!(
            "{:<20} {:>4} {:>4} {:>14.0} {:>10} {:>10.4} {:>10.4} {:>9.1}",
            c.protocol.name(),
            c.n_aps,
            c.n_channels,
            r.mean.throughput_bps,
            utility,
            r.mean.collisions_per_txop,
            r.mean.idle_per_txop,
            r.wall_clock_s
        );
    }
}

fn execute(exp: &Experiment, out: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let points = exp.points().len();
    eprintln!("running '{}': {points} point(s)", exp.name);
    let reports = run_experiment_with(exp, workers)?;
    print_summary(&reports);
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&exp.name));
    let (summary, trace) = emit_csv(exp, &reports, &dir).with_context(|| format!("cannot write to {}", dir.display()))?;
    eprintln!("wrote {} and {}", summary.display(), trace.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let workers = cli.workers.map(usize::from);
    match cli.command {
        Command::Run { config, out } => execute(&load(&config)?, out, workers),
        Command::Sweep { config, params, out } => {
            let mut exp = load(&config)?;
            for p in params {
                match p.key {
                    SweepKey::N => exp.n_values = p.values,
                    SweepKey::F => exp.f_values = p.values,
                }
            }
            exp.validate()?;
            execute(&exp, out, workers)
        }
        Command::Presets { action: PresetAction::List } => {
            for p in PRESETS.iter() {
                let e = p.experiment();
                let protocols: Vec<&str> = e.protocols.iter().map(|p| p.name()).collect();
                println!(
                    "{:<8} N={:?} F={:?} trials={} [{}]\n         {}",
                    p.name,
                    e.n_values,
                    e.f_values,
                    e.base.trials,
                    protocols.join(", "),
                    p.description
                );
            }
            Ok(())
        }
        Command::Validate { config } => {
            let exp = load(&config)?;
            println!("ok: '{}' with {} point(s)", exp.name, exp.points().len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
