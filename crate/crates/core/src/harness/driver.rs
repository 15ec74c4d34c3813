//! Training and evaluation loops.
//!
//! A run is `iterations` environment steps split into `episodes` contiguous
//! blocks. Each episode starts from an empty buffer and a freshly drawn link.
//! Rollouts never straddle an episode boundary: the partial rollout is closed
//! with a bootstrap value and used for an update before the reset.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::agents::checkpoint;
use crate::agents::{Agent, PolicyValueNet, RolloutBuffer, Transition};
use crate::env::{Env, MdpAction, StepOutcome};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::metrics::{write_metrics_csv, IntervalLog, MetricsRow};
use crate::num::Real;
use crate::rng::{SeedSplitter, Stream};

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVAL_METRICS_FILE: &str = "eval_metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";

/// Non-empty episodes as `(episode number from 1, steps)`; lengths differ by at
/// most one and sum to `iterations`.
pub fn episode_lengths(iterations: u64, episodes: u64) -> Vec<(u64, u64)> {
    let episodes = episodes.max(1);
    (0..episodes)
        .map(|e| {
            let start = iterations * e / episodes;
            let end = iterations * (e + 1) / episodes;
            (e + 1, end - start)
        })
        .filter(|&(_, n)| n > 0)
        .collect()
}

/// Step-weighted means over a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunSummary {
    pub steps: u64,
    pub reward: f64,
    pub queue: f64,
    pub aou_slots: f64,
    pub dropped: f64,
    pub delivered_pkts_per_slot: f64,
    pub capacity_bps: f64,
    pub velocity_rmse_ms: f64,
    /// Mean chosen frame count.
    pub n_frames: f64,
}

impl RunSummary {
    fn record<T: Real>(&mut self, action: MdpAction, out: &StepOutcome<T>) {
        self.steps += 1;
        self.reward += out.reward.as_f64();
        self.queue += out.q_end as f64;
        self.aou_slots += out.aou_avg.as_f64();
        self.dropped += out.dropped as f64;
        self.delivered_pkts_per_slot += out.delivered_rate_pkts.as_f64();
        self.capacity_bps += out.capacity_bps.as_f64();
        self.velocity_rmse_ms += out.velocity_rmse.as_f64();
        self.n_frames += action.n_frames as f64;
    }

    fn finish(mut self) -> Self {
        let n = self.steps.max(1) as f64;
        self.reward /= n;
        self.queue /= n;
        self.aou_slots /= n;
        self.dropped /= n;
        self.delivered_pkts_per_slot /= n;
        self.capacity_bps /= n;
        self.velocity_rmse_ms /= n;
        self.n_frames /= n;
        self
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput<T: Real> {
    pub net: PolicyValueNet<T>,
    pub rows: Vec<MetricsRow>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub rows: Vec<MetricsRow>,
    pub summary: RunSummary,
}

/// How actions are chosen during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionRule {
    /// Per-head argmax.
    Greedy,
    /// Argmax modulation with the frame count pinned.
    GreedyFixedFrames(usize),
    /// Draws from the policy.
    Sampled,
}

struct Logger {
    interval: u64,
    log: IntervalLog,
    rows: Vec<MetricsRow>,
    summary: RunSummary,
    step: u64,
}

impl Logger {
    fn new(interval: u64) -> Self {
        Self {
            interval: interval.max(1),
            log: IntervalLog::default(),
            rows: Vec::new(),
            summary: RunSummary::default(),
            step: 0,
        }
    }

    fn record<T: Real>(&mut self, episode: u64, action: MdpAction, out: &StepOutcome<T>) -> Result<()> {
        if !out.reward.is_finite() || !out.velocity_rmse.is_finite() || !out.capacity_bps.is_finite() {
            return Err(Error::Numeric(format!("non-finite metrics at step {}", self.step + 1)));
        }
        self.step += 1;
        self.log.record(action, out);
        self.summary.record(action, out);
        if self.log.len() >= self.interval {
            self.flush(episode);
        }
        Ok(())
    }

    fn flush(&mut self, episode: u64) {
        if let Some(row) = self.log.flush(episode, self.step) {
            self.rows.push(row);
        }
    }
}

fn make_env<T: Real>(config: &RunConfig, split: &SeedSplitter) -> Result<Env<T>> {
    Env::new(
        config.env_params::<T>(),
        split.stream(Stream::Channel),
        split.stream(Stream::Traffic),
    )
}

/// Trains a fresh agent for `config.run.iterations` steps.
pub fn train<T: Real>(config: &RunConfig) -> Result<TrainOutput<T>> {
    config.check()?;
    let split = SeedSplitter::new(config.run.seed);
    let mut env = make_env::<T>(config, &split)?;
    let mut agent_rng = split.stream(Stream::Agent);
    let mut agent = Agent::<T>::new(
        config.agent.clone(),
        config.env.sensing.n_frames_max,
        &mut split.stream(Stream::Init),
    );
    let mut buffer = RolloutBuffer::new(config.agent.rollout_len);
    let mut logger = Logger::new(config.run.log_interval);

    for (episode, steps) in episode_lengths(config.run.iterations, config.run.episodes) {
        let mut state = env.reset()?;
        agent.end_episode();
        for t in 0..steps {
            let features = env.features(&state);
            let decision = agent.act(&features, &mut agent_rng, false)?;
            let action = decision.sampled.action;
            let (next, out) = env.step(action)?;
            logger.record(episode, action, &out)?;
            let reward = agent.learning_reward(out.reward.as_f64());
            buffer.push(Transition {
                features: features.to_vec(),
                mod_index: decision.sampled.mod_index,
                frame_index: decision.sampled.frame_index,
                log_prob: decision.sampled.log_prob,
                reward,
                value: decision.value,
            })?;
            state = next;
            if buffer.is_full() || t + 1 == steps {
                let bootstrap = agent.value(&env.features(&state))?;
                agent.finalize(&mut buffer, bootstrap)?;
                agent.update(&buffer, &mut agent_rng)?;
                buffer.clear();
            }
        }
        logger.flush(episode);
    }

    Ok(TrainOutput {
        net: agent.net().clone(),
        rows: logger.rows,
        summary: logger.summary.finish(),
    })
}

/// Seed for evaluation streams, distinct from the training streams of the same
/// master seed so a policy is never scored on the trace it trained on.
fn eval_splitter(seed: u64) -> SeedSplitter {
    SeedSplitter::new(SeedSplitter::new(seed).stream(Stream::Eval).random())
}

/// Runs `config.run.eval_iterations` steps with a fixed network.
pub fn evaluate<T: Real>(config: &RunConfig, net: &PolicyValueNet<T>, rule: ActionRule) -> Result<EvalOutput> {
    config.check()?;
    let n_frames_max = config.env.sensing.n_frames_max;
    if net.shape().n_frames != n_frames_max {
        return Err(Error::Shape(format!(
            "network has {} frame logits, configuration allows {n_frames_max} frames",
            net.shape().n_frames
        )));
    }
    if let ActionRule::GreedyFixedFrames(n) = rule {
        MdpAction::new(1, n).validate(n_frames_max)?;
    }
    let split = eval_splitter(config.run.seed);
    let mut env = make_env::<T>(config, &split)?;
    let mut rng = split.stream(Stream::Agent);
    let agent = Agent::with_net(config.agent.clone(), net.clone());
    let mut logger = Logger::new(config.run.log_interval);

    for (episode, steps) in episode_lengths(config.run.eval_iterations, config.run.episodes) {
        let mut state = env.reset()?;
        for _ in 0..steps {
            let features = env.features(&state);
            let greedy = rule != ActionRule::Sampled;
            let mut action = agent.act(&features, &mut rng, greedy)?.sampled.action;
            if let ActionRule::GreedyFixedFrames(n) = rule {
                action.n_frames = n;
            }
            let (next, out) = env.step(action)?;
            logger.record(episode, action, &out)?;
            state = next;
        }
        logger.flush(episode);
    }
    Ok(EvalOutput {
        rows: logger.rows,
        summary: logger.summary.finish(),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_checkpoint<T: Real>(net: &PolicyValueNet<T>, path: &Path) -> Result<()> {
    fs::write(path, checkpoint::to_text(net)).map_err(io_err(path))
}

pub fn load_checkpoint<T: Real>(config: &RunConfig, path: &Path) -> Result<PolicyValueNet<T>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let shape = crate::agents::NetShape::new(config.agent.hidden, config.env.sensing.n_frames_max);
    checkpoint::from_text(&text, shape)
}

/// Files written by [`train_to_dir`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainArtifacts {
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    pub summary: RunSummary,
    pub rows: usize,
}

/// Trains in `f64` and writes the metrics CSV and checkpoint under `out_dir`.
pub fn train_to_dir(config: &RunConfig) -> Result<TrainArtifacts> {
    let out = train::<f64>(config)?;
    let dir = &config.run.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let metrics = dir.join(METRICS_FILE);
    let checkpoint = dir.join(CHECKPOINT_FILE);
    write_metrics_csv(&out.rows, &metrics)?;
    save_checkpoint(&out.net, &checkpoint)?;
    Ok(TrainArtifacts {
        metrics,
        checkpoint,
        summary: out.summary,
        rows: out.rows.len(),
    })
}

/// Greedy evaluation of a stored checkpoint, written to `out_dir`.
pub fn evaluate_to_dir(config: &RunConfig, checkpoint_path: &Path) -> Result<(PathBuf, RunSummary)> {
    let net = load_checkpoint::<f64>(config, checkpoint_path)?;
    let out = evaluate(config, &net, ActionRule::Greedy)?;
    let dir = &config.run.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let metrics = dir.join(EVAL_METRICS_FILE);
    write_metrics_csv(&out.rows, &metrics)?;
    Ok((metrics, out.summary))
}

/// Runs independent replicas in parallel; results keep the input order.
pub fn replicas<I, R, F>(items: Vec<I>, f: F) -> Vec<R>
where
    I: Send,
    R: Send,
    F: Fn(I) -> R + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}
