//! The link-adaptation MDP: state `(q, eta)`, action `(modulation, frames)`.
//!
//! One [`Env::step`] is one slot. Metrics for the slot are computed with the
//! SINR in effect when the slot started; the blocking level is re-drawn last and
//! only shows up in the next state.

use crate::channel::{
    alignment_fraction, effective_rate_bps, sample_categorical, validate_config, BlockingLevel, LinkParams,
    LinkState,
};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::StreamRng;
use crate::sensing::{velocity_rmse, SensingParams};
use crate::traffic::{sample_arrivals, PacketLedger, TrafficParams};

/// Bits per subcarrier symbol, BPSK through 64-QAM.
pub const MODULATIONS: [u8; 4] = [1, 2, 4, 6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpState<T> {
    pub q: usize,
    pub eta: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MdpAction {
    pub mod_bits: u8,
    pub n_frames: usize,
}

impl MdpAction {
    pub fn new(mod_bits: u8, n_frames: usize) -> Self {
        Self { mod_bits, n_frames }
    }

    /// Maps head indices to an action: modulation index into [`MODULATIONS`],
    /// frame index `j` to `j + 1` frames.
    pub fn from_indices(mod_index: usize, frame_index: usize) -> Result<Self> {
        let mod_bits = *MODULATIONS
            .get(mod_index)
            .ok_or_else(|| Error::Domain(format!("modulation index {mod_index} out of range")))?;
        Ok(Self {
            mod_bits,
            n_frames: frame_index + 1,
        })
    }

    pub fn mod_index(&self) -> Option<usize> {
        MODULATIONS.iter().position(|&m| m == self.mod_bits)
    }

    pub fn frame_index(&self) -> usize {
        self.n_frames - 1
    }

    pub fn validate(&self, n_frames_max: usize) -> Result<()> {
        if self.mod_index().is_none() {
            return Err(Error::Domain(format!("unsupported modulation order {}", self.mod_bits)));
        }
        if self.n_frames == 0 || self.n_frames > n_frames_max {
            return Err(Error::Domain(format!(
                "frame count {} outside 1..={n_frames_max}",
                self.n_frames
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Penalize the buffer-average age of updates.
    Aou,
    /// Penalize the raw queue length.
    QueueBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights<T> {
    pub w1: T,
    pub w2: T,
    pub w3: T,
    pub mode: RewardMode,
}

impl<T: Real> Default for RewardWeights<T> {
    fn default() -> Self {
        Self {
            w1: T::lit(1e-5),
            w2: T::one(),
            w3: T::lit(1e-5),
            mode: RewardMode::Aou,
        }
    }
}

/// Negative weighted cost of a slot. The first term is the buffer-average age
/// or the queue length depending on `weights.mode`.
pub fn compute_reward<T: Real>(aou_avg: T, q: usize, rmse: T, dropped: u64, weights: &RewardWeights<T>) -> T {
    let backlog = match weights.mode {
        RewardMode::Aou => aou_avg,
        RewardMode::QueueBaseline => T::from_count(q as u64),
    };
    -(weights.w1 * backlog + weights.w2 * rmse + weights.w3 * T::from_count(dropped))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput<T> {
    /// Packets the action would put on air, capped by the link capacity.
    pub attempted_pkts: T,
    /// Whole packets the queue may release this slot.
    pub capacity_pkts: u64,
    pub served_pkts: u64,
    /// Served packets that survive the packet error rate.
    pub delivered_pkts: T,
}

/// Packets per slot carried by `action`: `N·m·n / (8 |P|)`, capped by the
/// slot's share of the effective rate, then floored for service.
pub fn throughput_packets<T: Real>(
    action: &MdpAction,
    capacity_bps: T,
    per: T,
    queue_len: usize,
    n_subcarriers: usize,
    slot_s: T,
    packet_bytes: u64,
) -> Throughput<T> {
    let packet_bits = T::from_count(8 * packet_bytes);
    let offered = T::from_count((n_subcarriers * action.mod_bits as usize * action.n_frames) as u64) / packet_bits;
    let cap = capacity_bps * slot_s / packet_bits;
    let attempted = offered.min(cap).max(T::zero());
    let capacity_pkts = attempted.floor().to_u64().unwrap_or(u64::MAX);
    let served_pkts = capacity_pkts.min(queue_len as u64);
    Throughput {
        attempted_pkts: attempted,
        capacity_pkts,
        served_pkts,
        delivered_pkts: (T::one() - per) * T::from_count(served_pkts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    pub reward: T,
    pub q_end: usize,
    pub served: u64,
    pub arrivals: u64,
    pub dropped: u64,
    /// Successfully delivered packets this slot.
    pub delivered_rate_pkts: T,
    pub delivered_rate_bps: T,
    /// Alignment-discounted Shannon rate during the slot.
    pub capacity_bps: T,
    pub velocity_rmse: T,
    pub aou_avg: T,
    /// Link condition the slot was played under.
    pub blocking: BlockingLevel,
    pub eta: T,
    pub per: T,
    pub blocking_next: BlockingLevel,
    pub eta_next: T,
}

/// Affine map from `(q, eta)` to network inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaling<T> {
    pub sinr_db_min: T,
    pub sinr_db_max: T,
}

impl<T: Real> Default for FeatureScaling<T> {
    fn default() -> Self {
        Self {
            sinr_db_min: T::lit(-40.0),
            sinr_db_max: T::lit(40.0),
        }
    }
}

impl<T: Real> FeatureScaling<T> {
    pub fn features(&self, state: &MdpState<T>, q_max: usize) -> [T; 2] {
        let q = T::from_count(state.q as u64) / T::from_count(q_max.max(1) as u64);
        let mid = (self.sinr_db_max + self.sinr_db_min) / T::lit(2.0);
        let half = (self.sinr_db_max - self.sinr_db_min) / T::lit(2.0);
        [q, (state.eta.to_db() - mid) / half]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams<T> {
    pub link: LinkParams<T>,
    pub sensing: SensingParams<T>,
    pub traffic: TrafficParams<T>,
    pub weights: RewardWeights<T>,
    pub features: FeatureScaling<T>,
}

impl<T: Real> Default for EnvParams<T> {
    fn default() -> Self {
        Self {
            link: LinkParams::default(),
            sensing: SensingParams::default(),
            traffic: TrafficParams::default(),
            weights: RewardWeights::default(),
            features: FeatureScaling::default(),
        }
    }
}

/// Single-link environment. Owns its channel and traffic random streams.
#[derive(Debug, Clone)]
pub struct Env<T: Real> {
    params: EnvParams<T>,
    alignment: T,
    ledger: PacketLedger,
    link: Option<LinkState<T>>,
    realign: bool,
    channel_rng: StreamRng,
    traffic_rng: StreamRng,
}

impl<T: Real> Env<T> {
    pub fn new(params: EnvParams<T>, channel_rng: StreamRng, traffic_rng: StreamRng) -> Result<Self> {
        let violations = validate_config(&params.link, &params.sensing, &params.traffic);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let alignment = alignment_fraction(&params.link)?.fraction;
        let ledger = PacketLedger::new(params.traffic.q_max, params.traffic.packet_bytes);
        Ok(Self {
            params,
            alignment,
            ledger,
            link: None,
            realign: true,
            channel_rng,
            traffic_rng,
        })
    }

    pub fn params(&self) -> &EnvParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut EnvParams<T> {
        &mut self.params
    }

    pub fn ledger(&self) -> &PacketLedger {
        &self.ledger
    }

    pub fn link(&self) -> Option<&LinkState<T>> {
        self.link.as_ref()
    }

    pub fn state(&self) -> Option<MdpState<T>> {
        self.link.map(|l| MdpState {
            q: self.ledger.len(),
            eta: l.sinr_linear,
        })
    }

    pub fn features(&self, state: &MdpState<T>) -> [T; 2] {
        self.params.features.features(state, self.params.traffic.q_max)
    }

    fn draw_link(&mut self) -> Result<LinkState<T>> {
        let b = sample_categorical(&self.params.link.blocking_probs, &mut self.channel_rng)?;
        let blocking = BlockingLevel::from_index(b).expect("four blocking levels");
        let p = sample_categorical(&self.params.link.per_probs, &mut self.channel_rng)?;
        LinkState::new(blocking, self.params.link.per_values[p], &self.params.link)
    }

    /// Empties the buffer and draws a fresh blocking level and error rate.
    pub fn reset(&mut self) -> Result<MdpState<T>> {
        self.ledger.clear();
        self.link = Some(self.draw_link()?);
        self.realign = true;
        Ok(self.state().expect("link drawn"))
    }

    /// Slot share available for data given the alignment policy.
    fn data_fraction(&self) -> T {
        if !self.params.link.align_on_block_change || self.realign {
            self.alignment
        } else {
            T::one()
        }
    }

    pub fn step(&mut self, action: MdpAction) -> Result<(MdpState<T>, StepOutcome<T>)> {
        let mut link = self
            .link
            .ok_or_else(|| Error::State("step called before reset".into()))?;
        action.validate(self.params.sensing.n_frames_max)?;
        let p = &self.params;
        let eta = link.sinr_linear;
        let blocking = link.blocking;

        let arrivals = sample_arrivals(p.traffic.lambda_slot, &mut self.traffic_rng)?;

        let capacity_bps = effective_rate_bps(eta, self.data_fraction(), p.link.bandwidth_hz);
        let plan = throughput_packets(
            &action,
            capacity_bps,
            link.per,
            self.ledger.len(),
            p.sensing.n_subcarriers,
            p.link.slot_s,
            p.traffic.packet_bytes,
        );

        let report = self.ledger.advance_slot::<T>(arrivals, plan.capacity_pkts);
        debug_assert_eq!(report.served, plan.served_pkts);

        let rmse = velocity_rmse(action.n_frames, eta, &p.sensing)?;

        let per_index = sample_categorical(&p.link.per_probs, &mut self.channel_rng)?;
        link.per = p.link.per_values[per_index];

        let delivered = (T::one() - link.per) * T::from_count(report.served);
        let delivered_bps = delivered * T::from_count(8 * p.traffic.packet_bytes) / p.link.slot_s;

        let reward = compute_reward(report.aou_avg, report.q_end, rmse, report.dropped, &p.weights);

        let b = sample_categorical(&p.link.blocking_probs, &mut self.channel_rng)?;
        let next_blocking = BlockingLevel::from_index(b).expect("four blocking levels");
        let next = LinkState::new(next_blocking, link.per, &p.link)?;
        self.realign = next_blocking != blocking;
        self.link = Some(next);

        let outcome = StepOutcome {
            reward,
            q_end: report.q_end,
            served: report.served,
            arrivals,
            dropped: report.dropped,
            delivered_rate_pkts: delivered,
            delivered_rate_bps: delivered_bps,
            capacity_bps,
            velocity_rmse: rmse,
            aou_avg: report.aou_avg,
            blocking,
            eta,
            per: link.per,
            blocking_next: next_blocking,
            eta_next: next.sinr_linear,
        };
        let state = MdpState {
            q: report.q_end,
            eta: next.sinr_linear,
        };
        Ok((state, outcome))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, SeedSplitter, Stream};

    fn env_with(params: EnvParams<f64>, seed: u64) -> Env<f64> {
        let split = SeedSplitter::new(seed);
        Env::new(params, split.stream(Stream::Channel), split.stream(Stream::Traffic)).unwrap()
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights::<f64>::default();
        assert!((compute_reward(50.0, 0, 0.1, 10, &w) + 0.1006).abs() < 1e-12);
        assert_eq!(compute_reward(0.0, 0, 0.0, 0, &w), 0.0);
        let base = RewardWeights {
            mode: RewardMode::QueueBaseline,
            ..w
        };
        assert!((compute_reward(0.0, 100, 0.5, 0, &base) + 0.501).abs() < 1e-12);
    }

    #[test]
    fn throughput_examples() {
        let a = MdpAction::new(6, 100);
        let t = throughput_packets(&a, 1.454e10_f64, 0.003, 20, 512, 0.002, 4000);
        assert!((t.attempted_pkts - 9.6).abs() < 1e-12);
        assert_eq!(t.served_pkts, 9);
        assert!((t.delivered_pkts - 8.973).abs() < 1e-12);
        let bps = t.delivered_pkts * 32_000.0 / 0.002;
        assert!((bps - 143.568e6).abs() < 1.0);

        let t = throughput_packets(&MdpAction::new(1, 1), 1.454e10_f64, 0.003, 20, 512, 0.002, 4000);
        assert!((t.attempted_pkts - 0.016).abs() < 1e-15);
        assert_eq!(t.served_pkts, 0);

        let t = throughput_packets(&a, 1.454e10_f64, 1.0, 20, 512, 0.002, 4000);
        assert_eq!(t.served_pkts, 9);
        assert_eq!(t.delivered_pkts, 0.0);

        // Link capacity caps the offered load: 1.6e7 bit/s · 2 ms = 1 packet.
        let t = throughput_packets(&a, 1.6e7_f64, 0.0, 20, 512, 0.002, 4000);
        assert!((t.attempted_pkts - 1.0).abs() < 1e-12);
    }

    #[test]
    fn action_indices_roundtrip() {
        for m in 0..4 {
            for f in [0, 49, 99] {
                let a = MdpAction::from_indices(m, f).unwrap();
                assert_eq!(a.mod_index(), Some(m));
                assert_eq!(a.frame_index(), f);
            }
        }
        assert!(MdpAction::from_indices(4, 0).is_err());
        assert!(MdpAction::new(3, 10).validate(100).is_err());
        assert!(MdpAction::new(2, 0).validate(100).is_err());
        assert!(MdpAction::new(2, 101).validate(100).is_err());
    }

    #[test]
    fn reset_draws_los_state() {
        let mut env = env_with(EnvParams::default(), 1);
        let s = env.reset().unwrap();
        assert_eq!(s.q, 0);
        assert!((s.eta - 345.9).abs() < 0.5);
        let mut twin = env_with(EnvParams::default(), 1);
        assert_eq!(twin.reset().unwrap(), s);
    }

    #[test]
    fn step_before_reset_is_an_error() {
        let mut env = env_with(EnvParams::default(), 1);
        assert!(matches!(env.step(MdpAction::new(1, 1)), Err(Error::State(_))));
    }

    #[test]
    fn step_composes_module_outputs() {
        let mut env = env_with(EnvParams::default(), 4);
        let s0 = env.reset().unwrap();
        // Put ten packets in the buffer.
        let _ = env.ledger.advance_slot::<f64>(10, 0);
        let (s1, out) = env.step(MdpAction::new(6, 100)).unwrap();
        assert_eq!(out.served, 9);
        assert_eq!(out.q_end, 10 - 9 + out.arrivals as usize);
        assert_eq!(out.dropped, 0);
        let expected_rmse = velocity_rmse(100, s0.eta, &SensingParams::default()).unwrap();
        assert_eq!(out.velocity_rmse, expected_rmse);
        assert!((out.velocity_rmse - 0.0475).abs() < 1e-4);
        assert!((out.delivered_rate_pkts - 8.973).abs() < 1e-12);
        let w = RewardWeights::<f64>::default();
        assert!((out.reward + (w.w1 * out.aou_avg + expected_rmse)).abs() < 1e-15);
        assert_eq!(s1.q, out.q_end);
        assert_eq!(out.blocking_next, BlockingLevel::Los);
    }

    #[test]
    fn idle_slot_leaves_only_sensing_cost() {
        let mut params = EnvParams::default();
        params.traffic.lambda_slot = 0.0;
        let mut env = env_with(params, 2);
        let s = env.reset().unwrap();
        let (_, out) = env.step(MdpAction::new(1, 1)).unwrap();
        assert_eq!((out.served, out.dropped, out.q_end), (0, 0, 0));
        let rmse = velocity_rmse(1, s.eta, &SensingParams::default()).unwrap();
        assert_eq!(out.reward, -rmse);
    }

    #[test]
    fn degenerate_blocking_resampling() {
        let mut params = EnvParams::default();
        params.link.blocking_probs = vec![0.0, 0.0, 0.0, 1.0];
        let mut env = env_with(params, 8);
        env.reset().unwrap();
        for _ in 0..50 {
            let (_, out) = env.step(MdpAction::new(2, 40)).unwrap();
            assert_eq!(out.blocking_next, BlockingLevel::ThreeVehicles);
        }
    }

    #[test]
    fn reward_mode_changes_only_reward() {
        let mut a = EnvParams::default();
        a.link.blocking_probs = vec![0.25; 4];
        a.link.per_probs = vec![0.2, 0.3, 0.5];
        let mut b = a.clone();
        b.weights.mode = RewardMode::QueueBaseline;
        let mut ea = env_with(a, 5);
        let mut eb = env_with(b, 5);
        ea.reset().unwrap();
        eb.reset().unwrap();
        let mut rng = seeded(1);
        for _ in 0..500 {
            use rand::Rng;
            let act = MdpAction::from_indices(rng.random_range(0..4), rng.random_range(0..100)).unwrap();
            let (_, oa) = ea.step(act).unwrap();
            let (_, ob) = eb.step(act).unwrap();
            assert_eq!(
                StepOutcome { reward: 0.0, ..oa },
                StepOutcome { reward: 0.0, ..ob }
            );
            assert!(oa.reward < 0.0 && ob.reward < 0.0);
        }
    }

    #[test]
    fn align_on_block_change_only_charges_transitions() {
        let mut params = EnvParams::default();
        params.link.align_on_block_change = true;
        let mut env = env_with(params, 6);
        env.reset().unwrap();
        let (_, first) = env.step(MdpAction::new(1, 1)).unwrap();
        let (_, second) = env.step(MdpAction::new(1, 1)).unwrap();
        // All-LoS channel: only the first slot after reset realigns.
        assert!((first.capacity_bps / second.capacity_bps - 0.7975).abs() < 1e-12);
    }

    #[test]
    fn features_are_scaled() {
        let f = FeatureScaling::<f64>::default();
        let x = f.features(&MdpState { q: 100, eta: 1.0 }, 200);
        assert_eq!(x, [0.5, 0.0]);
        let x = f.features(&MdpState { q: 0, eta: 1e4 }, 200);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }
}
