use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use isac_core::agents::AgentKind;
use isac_core::env::RewardMode;
use isac_core::harness::{self, Overrides, RunConfig, Scenario};
use isac_core::Error;

/// Train and evaluate link-adaptation agents on the V2V sensing/communication simulator.
#[derive(Debug, Parser)]
#[command(name = "v2v-isac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AgentArg {
    Ppo,
    A2c,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RewardArg {
    Aou,
    Queue,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Poor,
    Normal,
    Strong,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train an agent and write metrics.csv and checkpoint.txt.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        agent: Option<AgentArg>,
        #[arg(long, value_enum)]
        reward: Option<RewardArg>,
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Total environment steps.
        #[arg(long)]
        iters: Option<u64>,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a checkpoint; writes eval_metrics.csv.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append a min-max normalized reward column to a metrics file.
    Postprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<RunConfig> {
    RunConfig::load(path, overrides).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config, &Overrides::default())?;
            println!(
                "ok: scenario {}, agent {}, {} iterations over {} episodes",
                cfg.run.scenario.name(),
                cfg.run.agent.name(),
                cfg.run.iterations,
                cfg.run.episodes
            );
        }
        Command::Train {
            config,
            agent,
            reward,
            scenario,
            seed,
            iters,
            episodes,
            out,
        } => {
            let overrides = Overrides {
                agent: agent.map(|a| match a {
                    AgentArg::Ppo => AgentKind::Ppo,
                    AgentArg::A2c => AgentKind::A2c,
                }),
                reward: reward.map(|r| match r {
                    RewardArg::Aou => RewardMode::Aou,
                    RewardArg::Queue => RewardMode::QueueBaseline,
                }),
                scenario: scenario.map(|s| match s {
                    ScenarioArg::Poor => Scenario::Poor,
                    ScenarioArg::Normal => Scenario::Normal,
                    ScenarioArg::Strong => Scenario::Strong,
                }),
                seed,
                iterations: iters,
                episodes,
                out_dir: Some(out),
            };
            let cfg = load(&config, &overrides)?;
            let a = harness::train_to_dir(&cfg)?;
            println!(
                "trained {} steps: mean reward {:.6}, {} rows -> {}, checkpoint -> {}",
                a.summary.steps,
                a.summary.reward,
                a.rows,
                a.metrics.display(),
                a.checkpoint.display()
            );
        }
        Command::Eval { config, checkpoint, out } => {
            let overrides = Overrides {
                out_dir: Some(out),
                ..Overrides::default()
            };
            let cfg = load(&config, &overrides)?;
            let (path, s) = harness::evaluate_to_dir(&cfg, &checkpoint)?;
            println!(
                "evaluated {} steps: reward {:.6}, queue {:.3}, velocity rmse {:.6} m/s, capacity {:.6e} bit/s, \
                 delivered {:.4} pkt/slot, dropped {:.4} pkt/slot -> {}",
                s.steps,
                s.reward,
                s.queue,
                s.velocity_rmse_ms,
                s.capacity_bps,
                s.delivered_pkts_per_slot,
                s.dropped,
                path.display()
            );
        }
        Command::Postprocess { input, out } => {
            let n = harness::postprocess(&input, &out)?;
            println!("wrote {n} rows -> {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let validation = err
                .chain()
                .filter_map(|e| e.downcast_ref::<Error>())
                .any(Error::is_validation);
            if validation {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
