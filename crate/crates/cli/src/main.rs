use std::io;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use riskrl::envs::EnvPreset;
use riskrl::harness::{
    demo_episode, read_results_csv, run_experiment, summarize, summary_table, write_summary_csv,
    ExperimentConfig, RiskMode,
};
use riskrl::{Interval, RiskLevel, Table};

/// Risk-scheduled distributional RL experiments.
#[derive(Parser)]
#[command(name = "riskrl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate, writing results.csv, run_meta.txt and checkpoints.
    Run {
        /// Flat `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        risk_mode: Option<String>,
        #[arg(long)]
        schedule_steps: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Any config key, repeatable: `--set total_steps=5000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Aggregate final evaluation rows per (env, risk mode).
    Summarize {
        /// results.csv files or run directories containing one.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write the summary as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay one greedy episode from a checkpoint, printing each step.
    Demo {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: EnvPreset,
        /// averse, neutral or seeking.
        #[arg(long, default_value = "neutral")]
        risk: RiskLevel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            risk_mode,
            schedule_steps,
            out,
            overrides,
        } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::default(),
            };
            for kv in &overrides {
                let Some((k, v)) = kv.split_once('=') else {
                    bail!("--set expects KEY=VALUE, got `{kv}`");
                };
                cfg.set(k.trim(), v.trim())?;
            }
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            if let Some(mode) = risk_mode {
                cfg.risk_mode = mode.parse::<RiskMode>()?;
            }
            if let Some(s) = schedule_steps {
                cfg.schedule_steps = s;
            }
            if let Some(out) = out {
                cfg.out_dir = Some(out);
            }
            if cfg.out_dir.is_none() {
                bail!("no output directory: pass --out or set `out` in the config");
            }
            let result = run_experiment(&cfg)?;
            print!("{}", summary_table(&summarize(&result.rows)));
            eprintln!("wrote {}", cfg.out_dir.unwrap().display());
        }
        Command::Summarize { inputs, csv } => {
            let mut rows = Vec::new();
            for input in inputs {
                let path = if input.is_dir() {
                    input.join(riskrl::harness::RESULTS_FILE)
                } else {
                    input
                };
                rows.extend(read_results_csv(&path)?);
            }
            if rows.is_empty() {
                bail!("no result rows found");
            }
            let summary = summarize(&rows);
            print!("{}", summary_table(&summary));
            if let Some(path) = csv {
                write_summary_csv(&path, &summary)?;
            }
        }
        Command::Demo {
            checkpoint,
            env,
            risk,
            seed,
        } => {
            let table = Table::load(&checkpoint)?;
            let interval: Interval = risk.interval();
            demo_episode(&table, env, &interval, seed, io::stdout().lock())
                .with_context(|| format!("replaying {}", checkpoint.display()))?;
        }
    }
    Ok(())
}

