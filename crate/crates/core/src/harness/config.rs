//! Run configuration: a sectioned TOML file resolved against built-in defaults
//! and scenario presets.
//!
//! ```toml
//! [channel]
//! preset = "calibrated"      # or "nominal"
//! [traffic]
//! q_max = 200
//! [agent]
//! lr = 3e-4
//! [run]
//! agent = "ppo"
//! scenario = "normal"
//! iterations = 20000
//! ```
//!
//! Explicit keys win over scenario presets. Every key is optional; unknown keys
//! are rejected with their full path.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::agents::{AgentConfig, AgentKind};
use crate::channel::{validate_config, LinkParams, LinkPreset};
use crate::env::{EnvParams, FeatureScaling, RewardMode, RewardWeights};
use crate::error::{Error, Result, Violation};
use crate::num::Real;
use crate::sensing::SensingParams;
use crate::traffic::TrafficParams;

/// Channel-quality scenario: blocking and error-rate probabilities plus load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Poor,
    Normal,
    Strong,
    /// No preset; `blocking_probs`, `per_probs` and `lambda_slot` must be given.
    Custom,
}

/// Blocking probabilities, error-rate probabilities and mean arrivals per slot.
pub struct ScenarioPreset {
    pub blocking_probs: [f64; 4],
    pub per_probs: [f64; 3],
    pub lambda_slot: f64,
}

impl Scenario {
    pub const NAMED: [Scenario; 3] = [Scenario::Poor, Scenario::Normal, Scenario::Strong];

    pub fn preset(self) -> Option<ScenarioPreset> {
        let (blocking_probs, per_probs, lambda_slot) = match self {
            Scenario::Poor => ([0.1, 0.1, 0.1, 0.7], [0.8, 0.1, 0.1], 2.0),
            Scenario::Normal => ([0.1, 0.7, 0.1, 0.1], [0.1, 0.8, 0.1], 6.0),
            Scenario::Strong => ([0.7, 0.1, 0.1, 0.1], [0.1, 0.1, 0.8], 9.0),
            Scenario::Custom => return None,
        };
        Some(ScenarioPreset {
            blocking_probs,
            per_probs,
            lambda_slot,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Poor => "poor",
            Scenario::Normal => "normal",
            Scenario::Strong => "strong",
            Scenario::Custom => "custom",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poor" => Ok(Scenario::Poor),
            "normal" => Ok(Scenario::Normal),
            "strong" => Ok(Scenario::Strong),
            "custom" => Ok(Scenario::Custom),
            _ => Err(Error::Config {
                key: "run.scenario".into(),
                message: format!("unknown scenario `{s}` (poor, normal, strong, custom)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AgentName {
    Ppo,
    A2c,
}

impl From<AgentName> for AgentKind {
    fn from(a: AgentName) -> Self {
        match a {
            AgentName::Ppo => AgentKind::Ppo,
            AgentName::A2c => AgentKind::A2c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RewardName {
    Aou,
    Queue,
}

impl From<RewardName> for RewardMode {
    fn from(r: RewardName) -> Self {
        match r {
            RewardName::Aou => RewardMode::Aou,
            RewardName::Queue => RewardMode::QueueBaseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PresetName {
    Calibrated,
    Nominal,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawChannel {
    preset: Option<PresetName>,
    carrier_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_dbm_hz: Option<f64>,
    tx_power_dbm: Option<f64>,
    antenna_gain_linear: Option<f64>,
    psi_deg: Option<f64>,
    phi_deg: Option<f64>,
    pilot_s: Option<f64>,
    slot_s: Option<f64>,
    distance_m: Option<f64>,
    blocking_probs: Option<Vec<f64>>,
    per_values: Option<Vec<f64>>,
    per_probs: Option<Vec<f64>>,
    align_on_block_change: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTraffic {
    lambda_slot: Option<f64>,
    q_max: Option<usize>,
    packet_bytes: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSensing {
    n_subcarriers: Option<usize>,
    n_frames_max: Option<usize>,
    frame_period_s: Option<f64>,
    velocity_period_s: Option<f64>,
    v_max: Option<f64>,
    d_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEnv {
    w1: Option<f64>,
    w2: Option<f64>,
    w3: Option<f64>,
    sinr_db_min: Option<f64>,
    sinr_db_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawAgent {
    hidden: Option<usize>,
    lr: Option<f64>,
    gamma: Option<f64>,
    lambda_gae: Option<f64>,
    clip_eps: Option<f64>,
    epochs: Option<usize>,
    minibatch: Option<usize>,
    rollout_len: Option<usize>,
    ent_coef: Option<f64>,
    vf_coef: Option<f64>,
    max_grad_norm: Option<f64>,
    normalize_advantages: Option<bool>,
    normalize_rewards: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    agent: Option<AgentName>,
    reward: Option<RewardName>,
    scenario: Option<Scenario>,
    seed: Option<u64>,
    episodes: Option<u64>,
    iterations: Option<u64>,
    eval_iterations: Option<u64>,
    log_interval: Option<u64>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    channel: RawChannel,
    traffic: RawTraffic,
    sensing: RawSensing,
    env: RawEnv,
    agent: RawAgent,
    run: RawRun,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub agent: Option<AgentKind>,
    pub reward: Option<RewardMode>,
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    pub episodes: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub agent: AgentKind,
    pub reward: RewardMode,
    pub scenario: Scenario,
    pub link_preset: LinkPreset,
    pub seed: u64,
    /// Environment resets over the run.
    pub episodes: u64,
    /// Total environment steps over the run.
    pub iterations: u64,
    pub eval_iterations: u64,
    /// Steps averaged into each metrics row.
    pub log_interval: u64,
    pub out_dir: PathBuf,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvParams<f64>,
    pub agent: AgentConfig,
    pub run: RunSettings,
}

pub const DEFAULT_ITERATIONS: u64 = 100_000;
pub const DESK_ITERATIONS: u64 = 20_000;

impl Default for RunConfig {
    fn default() -> Self {
        resolve(RawConfig::default(), &Overrides::default())
    }
}

fn resolve(raw: RawConfig, o: &Overrides) -> RunConfig {
    let RawConfig {
        channel: c,
        traffic: t,
        sensing: s,
        env: e,
        agent: a,
        run: r,
    } = raw;

    let scenario = o.scenario.or(r.scenario).unwrap_or(Scenario::Strong);
    let preset = scenario.preset();
    let link_preset = match c.preset.unwrap_or(PresetName::Calibrated) {
        PresetName::Calibrated => LinkPreset::Calibrated,
        PresetName::Nominal => LinkPreset::Nominal,
    };

    let base = LinkParams::<f64>::with_preset(link_preset);
    let slot_s = c.slot_s.unwrap_or(base.slot_s);
    let link = LinkParams {
        carrier_hz: c.carrier_hz.unwrap_or(base.carrier_hz),
        bandwidth_hz: c.bandwidth_hz.unwrap_or(base.bandwidth_hz),
        noise_dbm_hz: c.noise_dbm_hz.unwrap_or(base.noise_dbm_hz),
        tx_power_dbm: c.tx_power_dbm.unwrap_or(base.tx_power_dbm),
        antenna_gain_linear: c.antenna_gain_linear.unwrap_or(base.antenna_gain_linear),
        psi_deg: c.psi_deg.unwrap_or(base.psi_deg),
        phi_deg: c.phi_deg.unwrap_or(base.phi_deg),
        pilot_s: c.pilot_s.unwrap_or(0.01 * slot_s),
        slot_s,
        distance_m: c.distance_m.unwrap_or(base.distance_m),
        blocking_probs: c
            .blocking_probs
            .or_else(|| preset.as_ref().map(|p| p.blocking_probs.to_vec()))
            .unwrap_or_default(),
        per_values: c.per_values.unwrap_or(base.per_values),
        per_probs: c
            .per_probs
            .or_else(|| preset.as_ref().map(|p| p.per_probs.to_vec()))
            .unwrap_or_default(),
        align_on_block_change: c.align_on_block_change.unwrap_or(base.align_on_block_change),
    };

    let n_frames_max = s.n_frames_max.unwrap_or(100);
    let sbase = SensingParams::<f64>::for_slot(slot_s, n_frames_max.max(1));
    let sensing = SensingParams {
        n_subcarriers: s.n_subcarriers.unwrap_or(sbase.n_subcarriers),
        carrier_hz: link.carrier_hz,
        bandwidth_hz: link.bandwidth_hz,
        frame_period_s: s.frame_period_s.unwrap_or(sbase.frame_period_s),
        n_frames_max,
        v_max: s.v_max.unwrap_or(sbase.v_max),
        d_max: s.d_max.unwrap_or(sbase.d_max),
        velocity_period_s: s.velocity_period_s,
    };

    let tbase = TrafficParams::<f64>::default();
    let traffic = TrafficParams {
        lambda_slot: t
            .lambda_slot
            .or(preset.as_ref().map(|p| p.lambda_slot))
            .unwrap_or(f64::NAN),
        q_max: t.q_max.unwrap_or(tbase.q_max),
        packet_bytes: t.packet_bytes.unwrap_or(tbase.packet_bytes),
    };

    let wbase = RewardWeights::<f64>::default();
    let weights = RewardWeights {
        w1: e.w1.unwrap_or(wbase.w1),
        w2: e.w2.unwrap_or(wbase.w2),
        w3: e.w3.unwrap_or(wbase.w3),
        mode: o.reward.or(r.reward.map(Into::into)).unwrap_or(RewardMode::Aou),
    };
    let fbase = FeatureScaling::<f64>::default();
    let features = FeatureScaling {
        sinr_db_min: e.sinr_db_min.unwrap_or(fbase.sinr_db_min),
        sinr_db_max: e.sinr_db_max.unwrap_or(fbase.sinr_db_max),
    };

    let kind = o.agent.or(r.agent.map(Into::into)).unwrap_or(AgentKind::Ppo);
    let ab = AgentConfig::for_kind(kind);
    let agent = AgentConfig {
        kind,
        hidden: a.hidden.unwrap_or(ab.hidden),
        lr: a.lr.unwrap_or(ab.lr),
        gamma: a.gamma.unwrap_or(ab.gamma),
        lambda_gae: a.lambda_gae.unwrap_or(ab.lambda_gae),
        clip_eps: a.clip_eps.unwrap_or(ab.clip_eps),
        epochs: a.epochs.unwrap_or(ab.epochs),
        minibatch: a.minibatch.unwrap_or(ab.minibatch),
        rollout_len: a.rollout_len.unwrap_or(ab.rollout_len),
        ent_coef: a.ent_coef.unwrap_or(ab.ent_coef),
        vf_coef: a.vf_coef.unwrap_or(ab.vf_coef),
        max_grad_norm: a.max_grad_norm.unwrap_or(ab.max_grad_norm),
        normalize_advantages: a.normalize_advantages.unwrap_or(ab.normalize_advantages),
        normalize_rewards: a.normalize_rewards.unwrap_or(ab.normalize_rewards),
    };

    let iterations = o.iterations.or(r.iterations).unwrap_or(DEFAULT_ITERATIONS);
    let run = RunSettings {
        agent: kind,
        reward: weights.mode,
        scenario,
        link_preset,
        seed: o.seed.or(r.seed).unwrap_or(0),
        episodes: o.episodes.or(r.episodes).unwrap_or(100),
        iterations,
        eval_iterations: r.eval_iterations.unwrap_or(iterations),
        log_interval: r.log_interval.unwrap_or(100),
        out_dir: o.out_dir.clone().or(r.out_dir).unwrap_or_else(|| PathBuf::from("out")),
    };

    RunConfig {
        env: EnvParams {
            link,
            sensing,
            traffic,
            weights,
            features,
        },
        agent,
        run,
    }
}

fn section_of(key: &str) -> &'static str {
    match key {
        "lambda_slot" | "q_max" | "packet_bytes" => "traffic",
        "n_subcarriers" | "n_frames_max" | "frame_period_s" | "v_max" => "sensing",
        _ => "channel",
    }
}

impl RunConfig {
    /// Parses TOML text, applies overrides and validates.
    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            key: "<syntax>".into(),
            message: e.to_string().trim().to_string(),
        })?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                key: if path == "." { "<root>".into() } else { path },
                message: e.into_inner().to_string().trim().to_string(),
            }
        })?;
        let config = resolve(raw, overrides);
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, overrides)
    }

    /// Switches to a named scenario, replacing blocking/error probabilities and
    /// the arrival rate with the preset values.
    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        if let Some(p) = scenario.preset() {
            self.env.link.blocking_probs = p.blocking_probs.to_vec();
            self.env.link.per_probs = p.per_probs.to_vec();
            self.env.traffic.lambda_slot = p.lambda_slot;
        }
        self.run.scenario = scenario;
        self
    }

    pub fn with_reward(mut self, mode: RewardMode) -> Self {
        self.env.weights.mode = mode;
        self.run.reward = mode;
        self
    }

    /// Switches the agent kind, resetting hyperparameters to that kind's defaults.
    pub fn with_agent(mut self, kind: AgentKind) -> Self {
        self.agent = AgentConfig::for_kind(kind);
        self.run.agent = kind;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: u64, episodes: u64) -> Self {
        self.run.iterations = iterations;
        self.run.eval_iterations = iterations;
        self.run.episodes = episodes;
        self
    }

    /// Every violated constraint, keyed by `section.key`.
    pub fn validate(&self) -> Vec<Violation> {
        let e = &self.env;
        let mut v: Vec<Violation> = validate_config(&e.link, &e.sensing, &e.traffic)
            .into_iter()
            .map(|x| {
                let section = section_of(&x.key);
                x.in_section(section)
            })
            .collect();
        for (key, w) in [("env.w1", e.weights.w1), ("env.w2", e.weights.w2), ("env.w3", e.weights.w3)] {
            if !(w >= 0.0 && w.is_finite()) {
                v.push(Violation::new(key, format!("weight must be finite and >= 0, got {w}")));
            }
        }
        if !(e.features.sinr_db_min < e.features.sinr_db_max) {
            v.push(Violation::new("env.sinr_db_max", "must exceed env.sinr_db_min"));
        }

        let a = &self.agent;
        let mut need = |ok: bool, key: &str, msg: &str| {
            if !ok {
                v.push(Violation::new(key, msg));
            }
        };
        need(a.hidden > 0, "agent.hidden", "must be at least 1");
        need(a.lr > 0.0 && a.lr.is_finite(), "agent.lr", "must be positive");
        need(a.gamma > 0.0 && a.gamma <= 1.0, "agent.gamma", "must lie in (0, 1]");
        need((0.0..=1.0).contains(&a.lambda_gae), "agent.lambda_gae", "must lie in [0, 1]");
        need(a.clip_eps > 0.0, "agent.clip_eps", "must be positive");
        need(a.epochs > 0, "agent.epochs", "must be at least 1");
        need(a.minibatch > 0, "agent.minibatch", "must be at least 1");
        need(a.rollout_len > 0, "agent.rollout_len", "must be at least 1");
        need(a.ent_coef >= 0.0, "agent.ent_coef", "must be >= 0");
        need(a.vf_coef >= 0.0, "agent.vf_coef", "must be >= 0");
        need(a.max_grad_norm >= 0.0, "agent.max_grad_norm", "must be >= 0 (0 disables)");

        let r = &self.run;
        need(r.iterations > 0, "run.iterations", "must be at least 1");
        need(r.eval_iterations > 0, "run.eval_iterations", "must be at least 1");
        need(r.episodes > 0, "run.episodes", "must be at least 1");
        need(r.log_interval > 0, "run.log_interval", "must be at least 1");
        v
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Environment parameters in the requested scalar type.
    pub fn env_params<T: Real>(&self) -> EnvParams<T> {
        let e = &self.env;
        let c = |x: f64| T::lit(x);
        let cv = |xs: &[f64]| xs.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let l = &e.link;
        let s = &e.sensing;
        EnvParams {
            link: LinkParams {
                carrier_hz: c(l.carrier_hz),
                bandwidth_hz: c(l.bandwidth_hz),
                noise_dbm_hz: c(l.noise_dbm_hz),
                tx_power_dbm: c(l.tx_power_dbm),
                antenna_gain_linear: c(l.antenna_gain_linear),
                psi_deg: c(l.psi_deg),
                phi_deg: c(l.phi_deg),
                pilot_s: c(l.pilot_s),
                slot_s: c(l.slot_s),
                distance_m: c(l.distance_m),
                blocking_probs: cv(&l.blocking_probs),
                per_values: cv(&l.per_values),
                per_probs: cv(&l.per_probs),
                align_on_block_change: l.align_on_block_change,
            },
            sensing: SensingParams {
                n_subcarriers: s.n_subcarriers,
                carrier_hz: c(s.carrier_hz),
                bandwidth_hz: c(s.bandwidth_hz),
                frame_period_s: c(s.frame_period_s),
                n_frames_max: s.n_frames_max,
                v_max: c(s.v_max),
                d_max: c(s.d_max),
                velocity_period_s: s.velocity_period_s.map(c),
            },
            traffic: TrafficParams {
                lambda_slot: c(e.traffic.lambda_slot),
                q_max: e.traffic.q_max,
                packet_bytes: e.traffic.packet_bytes,
            },
            weights: RewardWeights {
                w1: c(e.weights.w1),
                w2: c(e.weights.w2),
                w3: c(e.weights.w3),
                mode: e.weights.mode,
            },
            features: FeatureScaling {
                sinr_db_min: c(e.features.sinr_db_min),
                sinr_db_max: c(e.features.sinr_db_max),
            },
        }
    }
}
