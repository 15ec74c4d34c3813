//! Blocking-dependent V2V link model: path loss, SINR, beam-alignment
//! overhead and alignment-discounted Shannon rate.

use rand::Rng;

use crate::error::{Error, Result, Violation};
use crate::num::{Real, SPEED_OF_LIGHT};
use crate::sensing::SensingParams;
use crate::traffic::TrafficParams;

/// Tolerance on probability-vector normalization.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Number of obstructing vehicles on the line of sight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockingLevel {
    Los,
    OneVehicle,
    TwoVehicles,
    ThreeVehicles,
}

impl BlockingLevel {
    pub const ALL: [BlockingLevel; 4] = [
        BlockingLevel::Los,
        BlockingLevel::OneVehicle,
        BlockingLevel::TwoVehicles,
        BlockingLevel::ThreeVehicles,
    ];

    const DELTA: [f64; 4] = [2.10, 1.22, 0.453, 0.240];
    const BETA_DB: [f64; 4] = [75.1, 94.6, 126.0, 135.0];
    const INR_DB: [f64; 4] = [24.0, 24.5, 37.0, 37.5];

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            BlockingLevel::Los => "LoS",
            BlockingLevel::OneVehicle => "1V",
            BlockingLevel::TwoVehicles => "2V",
            BlockingLevel::ThreeVehicles => "3V",
        }
    }

    /// Path-loss exponent.
    pub fn delta<T: Real>(self) -> T {
        T::lit(Self::DELTA[self.index()])
    }

    /// Path-loss intercept (dB).
    pub fn beta_db<T: Real>(self) -> T {
        T::lit(Self::BETA_DB[self.index()])
    }

    /// Interference-to-noise ratio (dB).
    pub fn inr_db<T: Real>(self) -> T {
        T::lit(Self::INR_DB[self.index()])
    }
}

/// Physical-layer constants of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams<T> {
    pub carrier_hz: T,
    pub bandwidth_hz: T,
    pub noise_dbm_hz: T,
    pub tx_power_dbm: T,
    /// Per-end antenna gain, linear.
    pub antenna_gain_linear: T,
    pub psi_deg: T,
    pub phi_deg: T,
    /// Pilot transmission interval (s).
    pub pilot_s: T,
    pub slot_s: T,
    pub distance_m: T,
    /// Probability of each blocking level, indexed like [`BlockingLevel::ALL`].
    pub blocking_probs: Vec<T>,
    /// Packet error rates the link can be in.
    pub per_values: Vec<T>,
    pub per_probs: Vec<T>,
    /// Charge the alignment overhead only on slots following a blocking change.
    pub align_on_block_change: bool,
}

/// Which antenna-gain/distance pairing to start from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkPreset {
    /// Gain 1.5 (linear) per end at 50 m.
    Nominal,
    /// 25 dBi per end at 10 m.
    Calibrated,
}

impl LinkPreset {
    pub fn antenna_gain_linear<T: Real>(self) -> T {
        match self {
            LinkPreset::Nominal => T::lit(1.5),
            LinkPreset::Calibrated => T::from_db(T::lit(25.0)),
        }
    }

    pub fn distance_m<T: Real>(self) -> T {
        match self {
            LinkPreset::Nominal => T::lit(50.0),
            LinkPreset::Calibrated => T::lit(10.0),
        }
    }
}

impl<T: Real> LinkParams<T> {
    /// Simulation constants with the given gain/distance preset and an
    /// all-LoS, lowest-PER channel.
    pub fn with_preset(preset: LinkPreset) -> Self {
        let slot_s = T::lit(0.002);
        Self {
            carrier_hz: T::lit(60e9),
            bandwidth_hz: T::lit(2.16e9),
            noise_dbm_hz: T::lit(-174.0),
            tx_power_dbm: T::lit(15.0),
            antenna_gain_linear: preset.antenna_gain_linear(),
            psi_deg: T::lit(45.0),
            phi_deg: T::lit(10.0),
            pilot_s: T::lit(0.01) * slot_s,
            slot_s,
            distance_m: preset.distance_m(),
            blocking_probs: vec![T::one(), T::zero(), T::zero(), T::zero()],
            per_values: vec![T::lit(0.10), T::lit(0.01), T::lit(0.003)],
            per_probs: vec![T::zero(), T::zero(), T::one()],
            align_on_block_change: false,
        }
    }
}

impl<T: Real> Default for LinkParams<T> {
    fn default() -> Self {
        Self::with_preset(LinkPreset::Calibrated)
    }
}

/// Instantaneous condition of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState<T> {
    pub blocking: BlockingLevel,
    pub per: T,
    pub path_loss_db: T,
    pub sinr_linear: T,
}

impl<T: Real> LinkState<T> {
    pub fn new(blocking: BlockingLevel, per: T, params: &LinkParams<T>) -> Result<Self> {
        let loss = path_loss(params.distance_m, blocking)?;
        Ok(Self {
            blocking,
            per,
            path_loss_db: loss.loss_db,
            sinr_linear: sinr(blocking, params)?,
        })
    }

    pub fn sinr_db(&self) -> T {
        self.sinr_linear.to_db()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss<T> {
    pub loss_db: T,
    pub gain_linear: T,
}

/// Log-distance path loss with blocking-dependent constants plus 15 dB/km
/// oxygen absorption.
pub fn path_loss<T: Real>(distance_m: T, level: BlockingLevel) -> Result<PathLoss<T>> {
    if !(distance_m > T::zero()) {
        return Err(Error::Domain(format!("distance must be positive, got {distance_m}")));
    }
    let loss_db = T::lit(10.0) * level.delta::<T>() * distance_m.log10()
        + level.beta_db::<T>()
        + T::lit(15.0) * distance_m / T::lit(1000.0);
    Ok(PathLoss {
        loss_db,
        gain_linear: T::from_db(-loss_db),
    })
}

/// Draws an index with probability `probs[i]`. Consumes exactly one uniform.
pub fn sample_categorical<T: Real, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> Result<usize> {
    let violations = check_probability_vector("probs", probs, None);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let u = T::lit(rng.random::<f64>());
    let mut cum = T::zero();
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > T::zero() {
            last_positive = i;
            cum = cum + p;
            if u < cum {
                return Ok(i);
            }
        }
    }
    // Sum slightly below one: the residual mass goes to the last reachable index.
    Ok(last_positive)
}

/// Received power (dBm) at the far end for a blocking level.
pub fn received_power_dbm<T: Real>(level: BlockingLevel, params: &LinkParams<T>) -> Result<T> {
    let loss = path_loss(params.distance_m, level)?;
    Ok(params.tx_power_dbm + T::lit(2.0) * params.antenna_gain_linear.to_db() - loss.loss_db)
}

/// Thermal noise plus interference (dBm), with interference set by the level's INR.
pub fn noise_plus_interference_dbm<T: Real>(level: BlockingLevel, params: &LinkParams<T>) -> T {
    let noise_floor = params.noise_dbm_hz + params.bandwidth_hz.to_db();
    noise_floor + (T::one() + T::from_db(level.inr_db::<T>())).to_db()
}

/// Linear SINR of the link at the given blocking level. Computed in dB so that
/// deep fades do not underflow before the final conversion.
pub fn sinr<T: Real>(level: BlockingLevel, params: &LinkParams<T>) -> Result<T> {
    let eta_db = received_power_dbm(level, params)? - noise_plus_interference_dbm(level, params);
    Ok(T::from_db(eta_db))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment<T> {
    pub tau_s: T,
    /// Share of the slot left for data after alignment.
    pub fraction: T,
}

/// Beam-alignment time for symmetric ends and the resulting usable slot share.
pub fn alignment_fraction<T: Real>(params: &LinkParams<T>) -> Result<Alignment<T>> {
    let ratio = params.psi_deg / params.phi_deg;
    let tau_s = ratio * ratio * params.pilot_s;
    if tau_s >= params.slot_s {
        return Err(Error::Domain(format!(
            "infeasible beamwidth: alignment time {tau_s} s is not shorter than slot {} s",
            params.slot_s
        )));
    }
    Ok(Alignment {
        tau_s,
        fraction: T::one() - tau_s / params.slot_s,
    })
}

/// Alignment-discounted Shannon rate (bit/s) for slot share `fraction`.
pub fn effective_rate_bps<T: Real>(eta_linear: T, fraction: T, bandwidth_hz: T) -> T {
    fraction * bandwidth_hz * (T::one() + eta_linear).log2()
}

pub(crate) fn check_probability_vector<T: Real>(
    key: &str,
    probs: &[T],
    expected_len: Option<usize>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some(n) = expected_len {
        if probs.len() != n {
            out.push(Violation::new(key, format!("expected {n} entries, got {}", probs.len())));
        }
    }
    if probs.is_empty() {
        out.push(Violation::new(key, "empty probability vector"));
        return out;
    }
    if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
        out.push(Violation::new(key, "entries must be finite and non-negative"));
    }
    let sum: T = probs.iter().copied().sum();
    if (sum - T::one()).abs().as_f64() > PROB_SUM_TOL {
        out.push(Violation::new(key, format!("probabilities sum to {sum}")));
    }
    out
}

/// Checks every cross-module feasibility constraint and returns all violations.
pub fn validate_config<T: Real>(
    params: &LinkParams<T>,
    sensing: &SensingParams<T>,
    traffic: &TrafficParams<T>,
) -> Vec<Violation> {
    let mut v = Vec::new();
    let positive = |v: &mut Vec<Violation>, key: &str, x: T| {
        if !(x > T::zero()) || !x.is_finite() {
            v.push(Violation::new(key, format!("must be positive, got {x}")));
        }
    };
    positive(&mut v, "slot_s", params.slot_s);
    positive(&mut v, "pilot_s", params.pilot_s);
    positive(&mut v, "distance_m", params.distance_m);
    positive(&mut v, "carrier_hz", params.carrier_hz);
    positive(&mut v, "bandwidth_hz", params.bandwidth_hz);
    positive(&mut v, "antenna_gain_linear", params.antenna_gain_linear);
    positive(&mut v, "psi_deg", params.psi_deg);
    positive(&mut v, "phi_deg", params.phi_deg);

    // Beamwidth feasibility with identical ends: phi^2 >= (T_p / s) psi^2.
    if params.slot_s > T::zero() {
        let lhs = params.phi_deg * params.phi_deg;
        let rhs = params.pilot_s / params.slot_s * params.psi_deg * params.psi_deg;
        if lhs < rhs {
            v.push(Violation::new(
                "phi_deg",
                format!("beamwidth infeasible: phi^2 = {lhs} < (T_p/s) psi^2 = {rhs}"),
            ));
        }
    }

    v.extend(check_probability_vector("blocking_probs", &params.blocking_probs, Some(4)));
    v.extend(check_probability_vector("per_probs", &params.per_probs, Some(params.per_values.len())));
    if params.per_values.len() != 3 {
        v.push(Violation::new(
            "per_values",
            format!("expected 3 entries, got {}", params.per_values.len()),
        ));
    }
    if params.per_values.iter().any(|p| !(*p >= T::zero() && *p <= T::one())) {
        v.push(Violation::new("per_values", "packet error rates must lie in [0, 1]"));
    }

    // Subcarrier orthogonality under Doppler, with a factor-of-ten margin.
    if sensing.n_subcarriers == 0 {
        v.push(Violation::new("n_subcarriers", "must be at least 1"));
    } else if params.carrier_hz > T::zero() {
        let limit = orthogonality_velocity_limit(sensing);
        if sensing.v_max * T::lit(10.0) > limit {
            v.push(Violation::new(
                "v_max",
                format!("v_max = {} m/s is not << c*df/(2 f_c) = {limit} m/s", sensing.v_max),
            ));
        }
    }
    if sensing.n_frames_max == 0 {
        v.push(Violation::new("n_frames_max", "must be at least 1"));
    }
    positive(&mut v, "frame_period_s", sensing.frame_period_s);
    if sensing.carrier_hz != params.carrier_hz || sensing.bandwidth_hz != params.bandwidth_hz {
        v.push(Violation::new("carrier_hz", "sensing and link must share carrier and bandwidth"));
    }

    if !(traffic.lambda_slot >= T::zero()) || !traffic.lambda_slot.is_finite() {
        v.push(Violation::new("lambda_slot", "mean arrivals per slot must be finite and >= 0"));
    }
    if traffic.q_max == 0 {
        v.push(Violation::new("q_max", "buffer capacity must be at least 1"));
    }
    if traffic.packet_bytes == 0 {
        v.push(Violation::new("packet_bytes", "packet size must be at least 1 byte"));
    }
    v
}

/// Highest radial velocity keeping subcarriers orthogonal, `c·Δf / (2 f_c)`.
pub fn orthogonality_velocity_limit<T: Real>(sensing: &SensingParams<T>) -> T {
    T::lit(SPEED_OF_LIGHT) * sensing.subcarrier_spacing_hz() / (T::lit(2.0) * sensing.carrier_hz)
}
