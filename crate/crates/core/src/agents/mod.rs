//! Actor-critic agents (A2C and PPO-clip) over a shared policy/value network.

pub mod adam;
pub mod buffer;
pub mod checkpoint;
pub mod dist;
pub mod net;
pub mod objectives;

use rand::seq::SliceRandom;
use rand::Rng;

pub use adam::Adam;
pub use buffer::{RolloutBuffer, Transition};
pub use dist::{sample_action, SampledAction};
pub use net::{Forward, NetShape, PolicyValueNet};
pub use objectives::{
    a2c_objective, ppo_clip_objective, ppo_clip_term, ratio_objective, value_objective, LossOutput, LossSpec,
    PolicyObjective, Sample,
};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    A2c,
    Ppo,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::A2c => "a2c",
            AgentKind::Ppo => "ppo",
        }
    }
}

/// Learning hyperparameters. None of these are fixed by the model; the
/// defaults are ordinary actor-critic settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub hidden: usize,
    pub lr: f64,
    pub gamma: f64,
    pub lambda_gae: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub rollout_len: usize,
    pub ent_coef: f64,
    pub vf_coef: f64,
    /// Global gradient-norm cap; `0` disables clipping.
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    /// Scale rewards by a running estimate of the discounted-return spread.
    pub normalize_rewards: bool,
}

impl AgentConfig {
    pub fn ppo() -> Self {
        Self {
            kind: AgentKind::Ppo,
            hidden: 64,
            lr: 3e-4,
            gamma: 0.99,
            lambda_gae: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatch: 64,
            rollout_len: 256,
            ent_coef: 0.01,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            normalize_rewards: false,
        }
    }

    /// Short n-step rollouts with a larger step size; long rollouts starve A2C
    /// of updates at desk-scale budgets.
    pub fn a2c() -> Self {
        Self {
            kind: AgentKind::A2c,
            lambda_gae: 0.0,
            lr: 7e-4,
            rollout_len: 16,
            ..Self::ppo()
        }
    }

    pub fn for_kind(kind: AgentKind) -> Self {
        match kind {
            AgentKind::A2c => Self::a2c(),
            AgentKind::Ppo => Self::ppo(),
        }
    }
}

/// Running spread of the discounted return, used to rescale rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnNormalizer {
    gamma: f64,
    ret: f64,
    mean: f64,
    var: f64,
    count: f64,
}

impl ReturnNormalizer {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            ret: 0.0,
            mean: 0.0,
            var: 1.0,
            count: 1e-4,
        }
    }

    pub fn scale(&mut self, reward: f64) -> f64 {
        self.ret = self.ret * self.gamma + reward;
        let delta = self.ret - self.mean;
        let total = self.count + 1.0;
        self.mean += delta / total;
        let m2 = self.var * self.count + delta * delta * self.count / total;
        self.var = m2 / total;
        self.count = total;
        reward / (self.var + 1e-8).sqrt()
    }

    pub fn end_episode(&mut self) {
        self.ret = 0.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision<T> {
    pub sampled: SampledAction<T>,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean probability ratio of the first minibatch, before any step.
    pub initial_ratio: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub optimizer_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Agent<T: Real> {
    config: AgentConfig,
    net: PolicyValueNet<T>,
    opt: Adam<T>,
    reward_norm: ReturnNormalizer,
}

fn normalize<T: Real>(xs: &mut [T]) {
    if xs.len() < 2 {
        return;
    }
    let n = T::from_count(xs.len() as u64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt() + T::lit(1e-8);
    xs.iter_mut().for_each(|x| *x = (*x - mean) / std);
}

fn clip_grad_norm<T: Real>(grad: &mut [T], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
    let max = T::lit(max_norm);
    if norm > max {
        let scale = max / norm;
        grad.iter_mut().for_each(|g| *g = *g * scale);
    }
}

impl<T: Real> Agent<T> {
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, n_frames_max: usize, init_rng: &mut R) -> Self {
        let net = PolicyValueNet::init(NetShape::new(config.hidden, n_frames_max), init_rng);
        Self::with_net(config, net)
    }

    pub fn with_net(config: AgentConfig, net: PolicyValueNet<T>) -> Self {
        let opt = Adam::new(net.params().len(), T::lit(config.lr));
        let reward_norm = ReturnNormalizer::new(config.gamma);
        Self {
            config,
            net,
            opt,
            reward_norm,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn net(&self) -> &PolicyValueNet<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut PolicyValueNet<T> {
        &mut self.net
    }

    pub fn act<R: Rng + ?Sized>(&self, features: &[T], rng: &mut R, greedy: bool) -> Result<Decision<T>> {
        let fwd = self.net.forward(features)?;
        let sampled = sample_action(&fwd.mod_logits, &fwd.frame_logits, rng, greedy)?;
        Ok(Decision {
            sampled,
            value: fwd.value,
        })
    }

    pub fn value(&self, features: &[T]) -> Result<T> {
        Ok(self.net.forward(features)?.value)
    }

    /// Reward as stored for learning (possibly rescaled).
    pub fn learning_reward(&mut self, reward: f64) -> T {
        if self.config.normalize_rewards {
            T::lit(self.reward_norm.scale(reward))
        } else {
            T::lit(reward)
        }
    }

    pub fn end_episode(&mut self) {
        self.reward_norm.end_episode();
    }

    /// Computes advantages and returns for a completed rollout.
    pub fn finalize(&self, buffer: &mut RolloutBuffer<T>, bootstrap_value: T) -> Result<()> {
        buffer.compute_gae(
            T::lit(self.config.gamma),
            T::lit(self.config.lambda_gae),
            bootstrap_value,
        )
    }

    fn samples(buffer: &RolloutBuffer<T>) -> Vec<Sample<T>> {
        buffer
            .steps()
            .iter()
            .zip(buffer.advantages())
            .zip(buffer.returns())
            .map(|((s, &advantage), &ret)| Sample {
                features: s.features.clone(),
                mod_index: s.mod_index,
                frame_index: s.frame_index,
                old_log_prob: s.log_prob,
                advantage,
                ret,
            })
            .collect()
    }

    fn spec(&self) -> LossSpec<T> {
        let policy = match self.config.kind {
            AgentKind::A2c => PolicyObjective::LogProb,
            AgentKind::Ppo => PolicyObjective::Clipped {
                epsilon: T::lit(self.config.clip_eps),
            },
        };
        LossSpec {
            policy: Some(policy),
            vf_coef: T::lit(self.config.vf_coef),
            ent_coef: T::lit(self.config.ent_coef),
        }
    }

    fn descend(&mut self, batch: &mut [Sample<T>]) -> Result<LossOutput<T>> {
        if self.config.normalize_advantages {
            let mut adv: Vec<T> = batch.iter().map(|s| s.advantage).collect();
            normalize(&mut adv);
            batch.iter_mut().zip(adv).for_each(|(s, a)| s.advantage = a);
        }
        let mut out = objectives::evaluate(&self.net, batch, &self.spec())?;
        clip_grad_norm(&mut out.grad, self.config.max_grad_norm);
        self.opt.step(self.net.params_mut(), &out.grad)?;
        Ok(out)
    }

    /// One learning phase on a finalized rollout: a single combined gradient
    /// step for A2C, several shuffled minibatch epochs for PPO.
    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &RolloutBuffer<T>, rng: &mut R) -> Result<UpdateStats> {
        if !buffer.is_finalized() {
            return Err(Error::State("rollout must be finalized before an update".into()));
        }
        let mut samples = Self::samples(buffer);
        let mut stats = UpdateStats::default();
        let record = |stats: &mut UpdateStats, out: &LossOutput<T>| {
            if stats.optimizer_steps == 0 {
                stats.initial_ratio = out.mean_ratio.as_f64();
            }
            stats.optimizer_steps += 1;
            stats.policy_loss += out.policy_loss.as_f64();
            stats.value_loss += out.value_loss.as_f64();
            stats.entropy += out.entropy.as_f64();
            stats.mean_ratio += out.mean_ratio.as_f64();
            stats.clip_fraction += out.clip_fraction.as_f64();
        };
        match self.config.kind {
            AgentKind::A2c => {
                let out = self.descend(&mut samples)?;
                record(&mut stats, &out);
            }
            AgentKind::Ppo => {
                let mb = self.config.minibatch.max(1);
                let mut order: Vec<usize> = (0..samples.len()).collect();
                for _ in 0..self.config.epochs.max(1) {
                    order.shuffle(rng);
                    for chunk in order.chunks(mb) {
                        let mut batch: Vec<Sample<T>> = chunk.iter().map(|&i| samples[i].clone()).collect();
                        let out = self.descend(&mut batch)?;
                        record(&mut stats, &out);
                    }
                }
            }
        }
        let k = stats.optimizer_steps.max(1) as f64;
        stats.policy_loss /= k;
        stats.value_loss /= k;
        stats.entropy /= k;
        stats.mean_ratio /= k;
        stats.clip_fraction /= k;
        Ok(stats)
    }
}
